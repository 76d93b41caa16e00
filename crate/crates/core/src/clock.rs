//! Wall-clock timing that degrades to zero on targets without a clock
//! (`wasm32-unknown-unknown`).

#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    start: std::time::Instant,
}

impl Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    pub fn start() -> Self {
        Self {
            start: std::time::Instant::now(),
        }
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    pub fn start() -> Self {
        Self {}
    }

    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    pub fn elapsed_us(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e6
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    pub fn elapsed_us(&self) -> f64 {
        0.0
    }
}
