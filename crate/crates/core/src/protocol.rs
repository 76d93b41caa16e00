//! Training-window orchestration: hybrid context windows and chained
//! forward training over a pluggable predictor.
//!
//! The orchestrator never looks inside frame payloads; they are opaque
//! byte buffers handed to the predictor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::memory_store::{FrameRecord, DEFAULT_CONTEXT_LEN};
use crate::retrieval::RetrievalResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContextMode {
    /// Second half holds retrieved spatial memory.
    Spatial,
    /// Second half holds earlier temporal frames.
    Extended,
}

/// `L` frame ids: the `L/2` most recent frames, then `L/2` memory slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow {
    pub slots: Vec<u32>,
    pub mode: ContextMode,
}

impl ContextWindow {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn fixed(&self) -> &[u32] {
        &self.slots[..self.slots.len() / 2]
    }

    pub fn context(&self) -> &[u32] {
        &self.slots[self.slots.len() / 2..]
    }
}

pub fn select_mode(retrieval: &RetrievalResult, tau_hist: usize) -> ContextMode {
    if retrieval.len() >= tau_hist {
        ContextMode::Spatial
    } else {
        ContextMode::Extended
    }
}

/// Builds the window for generating frame `t` with the default `L = 16`.
pub fn build_context_window(
    t: usize,
    history: &[FrameRecord],
    retrieval: &RetrievalResult,
    mode: ContextMode,
) -> Result<ContextWindow> {
    build_context_window_with(t, history, retrieval, mode, DEFAULT_CONTEXT_LEN)
}

/// `history[i]` is frame index `i`. Indices before 0 repeat the earliest
/// frame. In spatial mode, retrieved ids already in the fixed half are
/// skipped and any shortfall is back-filled from the extended frames,
/// most recent first.
pub fn build_context_window_with(
    t: usize,
    history: &[FrameRecord],
    retrieval: &RetrievalResult,
    mode: ContextMode,
    len: usize,
) -> Result<ContextWindow> {
    if len < 2 || !len.is_multiple_of(2) {
        return Err(invalid(format!(
            "context length {len} must be even and at least 2"
        )));
    }
    if t == 0 || history.len() < t {
        return Err(invalid(format!(
            "need frames 0..{t} in history, have {}",
            history.len()
        )));
    }
    let half = len / 2;
    let id_at = |i: isize| history[i.max(0) as usize].id;
    let t = t as isize;
    let fixed: Vec<u32> = (t - half as isize..t).map(id_at).collect();
    let extended: Vec<u32> = (t - len as isize..t - half as isize).map(id_at).collect();
    let mut slots = fixed.clone();
    match mode {
        ContextMode::Extended => slots.extend(&extended),
        ContextMode::Spatial => {
            for &id in retrieval.frames.iter().take(half) {
                if !slots.contains(&id) {
                    slots.push(id);
                }
            }
            for &id in extended.iter().rev() {
                if slots.len() == len {
                    break;
                }
                if !slots.contains(&id) {
                    slots.push(id);
                }
            }
            // very short histories cannot supply distinct frames
            while slots.len() < len {
                slots.push(id_at(0));
            }
        }
    }
    Ok(ContextWindow { slots, mode })
}

/// Whether a call may record gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    Training,
    NoGrad,
}

/// Seeded source for diffusion noise levels `t ~ U(0, T_noise)`.
pub struct NoiseSampler {
    rng: ChaCha8Rng,
    t_noise: f64,
}

impl NoiseSampler {
    pub fn new(seed: u64, t_noise: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            t_noise,
        }
    }

    pub fn sample_level(&mut self) -> f64 {
        self.rng.random_range(0.0..self.t_noise)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// The model side of chained forward training.
pub trait Predictor {
    /// Denoising loss for one window.
    fn loss(&mut self, window: &[&[u8]], conditioning: &[u8], noise: &mut NoiseSampler) -> f64;

    /// Few-step generation of the window's last frame.
    fn denoise(&mut self, window: &[&[u8]], conditioning: &[u8], mode: GradMode) -> Vec<u8>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    GroundTruth,
    Predicted,
}

impl Origin {
    pub fn token(self) -> &'static str {
        match self {
            Origin::GroundTruth => "gt",
            Origin::Predicted => "pred",
        }
    }
}

/// One slot of one chained window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRecord {
    pub step: usize,
    pub slot: usize,
    pub frame: usize,
    pub origin: Origin,
}

impl fmt::Display for SlotRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.step,
            self.slot,
            self.frame,
            self.origin.token()
        )
    }
}

impl FromStr for SlotRecord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(',').collect();
        let [step, slot, frame, origin] = parts[..] else {
            return Err(invalid(format!("trace record `{s}` needs 4 fields")));
        };
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|e| invalid(format!("trace field `{x}`: {e}")))
        };
        let origin = match origin {
            "gt" => Origin::GroundTruth,
            "pred" => Origin::Predicted,
            other => return Err(invalid(format!("unknown origin `{other}`"))),
        };
        Ok(Self {
            step: num(step)?,
            slot: num(slot)?,
            frame: num(frame)?,
            origin,
        })
    }
}

/// A gradient-free generation that fed a later window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiseRecord {
    pub step: usize,
    pub target: usize,
    pub grad_free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CftOutcome {
    pub loss: f64,
    pub step_losses: Vec<f64>,
    pub trace: Vec<SlotRecord>,
    pub denoise_calls: Vec<DenoiseRecord>,
    /// Predicted payloads left at the end, keyed by frame index.
    pub predicted: BTreeMap<usize, Vec<u8>>,
}

impl CftOutcome {
    /// Line-delimited `step,slot,frame,origin` records.
    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|r| format!("{r}\n")).collect()
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<SlotRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Runs `steps` chained windows of `window` frames. After every step but the
/// last, the window's final frame is regenerated without gradients and that
/// prediction replaces ground truth in all later windows.
pub fn run_cft(
    video: &[Vec<u8>],
    cond: &[Vec<u8>],
    steps: usize,
    window: usize,
    predictor: &mut dyn Predictor,
    noise: &mut NoiseSampler,
) -> Result<CftOutcome> {
    if steps == 0 || window == 0 {
        return Err(invalid("steps and window must be at least 1"));
    }
    if video.len() < steps + window - 1 {
        return Err(invalid(format!(
            "video has {} frames, chaining {steps} windows of {window} needs {}",
            video.len(),
            steps + window - 1
        )));
    }
    if cond.len() < steps {
        return Err(invalid(format!(
            "need {steps} conditioning entries, got {}",
            cond.len()
        )));
    }
    let mut predicted: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    let mut total = 0.0;
    let mut step_losses = Vec::with_capacity(steps);
    let mut trace = Vec::with_capacity(steps * window);
    let mut denoise_calls = Vec::new();
    for j in 0..steps {
        let mut frames: Vec<&[u8]> = Vec::with_capacity(window);
        for k in j..j + window {
            let (payload, origin) = match predicted.get(&k) {
                Some(p) => (p.as_slice(), Origin::Predicted),
                None => (video[k].as_slice(), Origin::GroundTruth),
            };
            frames.push(payload);
            trace.push(SlotRecord {
                step: j,
                slot: k - j,
                frame: k,
                origin,
            });
        }
        let loss = predictor.loss(&frames, &cond[j], noise);
        if !loss.is_finite() {
            return Err(invalid(format!(
                "predictor returned non-finite loss at step {j}"
            )));
        }
        step_losses.push(loss);
        total += loss;
        if j + 1 < steps {
            let target = j + window - 1;
            let frame = predictor.denoise(&frames, &cond[j], GradMode::NoGrad);
            denoise_calls.push(DenoiseRecord {
                step: j,
                target,
                grad_free: true,
            });
            predicted.insert(target, frame);
        }
    }
    Ok(CftOutcome {
        loss: total / steps as f64,
        step_losses,
        trace,
        denoise_calls,
        predicted,
    })
}

/// Deterministic predictor for exercising the orchestration.
///
/// `loss` is a seeded function of the window bytes and noise level;
/// `denoise` either echoes the last frame (identity mode) or tags it.
/// Panics if asked to denoise with gradients enabled.
#[derive(Debug, Clone)]
pub struct StubPredictor {
    pub identity: bool,
    pub constant_loss: Option<f64>,
    pub loss_calls: usize,
    pub denoise_calls: usize,
}

impl StubPredictor {
    /// Echoes ground truth and reports loss 1.0.
    pub fn identity() -> Self {
        Self {
            identity: true,
            constant_loss: Some(1.0),
            loss_calls: 0,
            denoise_calls: 0,
        }
    }

    /// Marks generated frames and reports a payload-dependent loss.
    pub fn marking() -> Self {
        Self {
            identity: false,
            constant_loss: None,
            loss_calls: 0,
            denoise_calls: 0,
        }
    }
}

impl Predictor for StubPredictor {
    fn loss(&mut self, window: &[&[u8]], conditioning: &[u8], noise: &mut NoiseSampler) -> f64 {
        self.loss_calls += 1;
        let level = noise.sample_level();
        if let Some(c) = self.constant_loss {
            return c;
        }
        let bytes: u64 = window
            .iter()
            .flat_map(|f| f.iter())
            .map(|&b| b as u64)
            .sum::<u64>()
            + conditioning.iter().map(|&b| b as u64).sum::<u64>();
        (bytes % 97) as f64 / 97.0 + level
    }

    fn denoise(&mut self, window: &[&[u8]], _conditioning: &[u8], mode: GradMode) -> Vec<u8> {
        assert_eq!(mode, GradMode::NoGrad, "denoise must run without gradients");
        self.denoise_calls += 1;
        let mut out = window.last().map(|f| f.to_vec()).unwrap_or_default();
        if !self.identity {
            out.push(0xFF);
        }
        out
    }
}
