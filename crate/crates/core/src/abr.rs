//! Classical ABR selectors and the rule for feeding them SARA's scalars.

use thiserror::Error;

use crate::player::{PlayerError, QoEParams, QualityKind, SmoothnessScale};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbrError {
    #[error("throughput history is empty")]
    EmptyHistory,
    #[error(transparent)]
    Player(#[from] PlayerError),
    #[error("invalid ABR parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BufferBased {
    Bba,
    Bola,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThroughputBased {
    Rate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hybrid {
    RobustMpc,
    Dynamic,
}

/// Which inputs an algorithm consumes decides which scalars reach it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AbrKind {
    BufferBased(BufferBased),
    ThroughputBased(ThroughputBased),
    Hybrid(Hybrid),
}

impl AbrKind {
    pub const BBA: Self = Self::BufferBased(BufferBased::Bba);
    pub const BOLA: Self = Self::BufferBased(BufferBased::Bola);
    pub const RATE: Self = Self::ThroughputBased(ThroughputBased::Rate);
    pub const ROBUST_MPC: Self = Self::Hybrid(Hybrid::RobustMpc);
    pub const DYNAMIC: Self = Self::Hybrid(Hybrid::Dynamic);

    /// The four baselines used in experiments.
    pub const BASELINES: [Self; 4] = [Self::BBA, Self::BOLA, Self::ROBUST_MPC, Self::DYNAMIC];

    pub fn name(self) -> &'static str {
        match self {
            Self::BufferBased(BufferBased::Bba) => "bba",
            Self::BufferBased(BufferBased::Bola) => "bola",
            Self::ThroughputBased(ThroughputBased::Rate) => "rate",
            Self::Hybrid(Hybrid::RobustMpc) => "robustmpc",
            Self::Hybrid(Hybrid::Dynamic) => "dynamic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let k = name.trim().to_ascii_lowercase().replace(['-', '_'], "");
        [Self::BBA, Self::BOLA, Self::RATE, Self::ROBUST_MPC, Self::DYNAMIC].into_iter().find(|a| a.name() == k)
    }

    pub fn uses_buffer(self) -> bool {
        !matches!(self, Self::ThroughputBased(_))
    }

    pub fn uses_throughput(self) -> bool {
        !matches!(self, Self::BufferBased(_))
    }
}

impl std::fmt::Display for AbrKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbrInputs<'a, T> {
    pub buffer_s: T,
    /// Headline throughput estimate ξ_k (kbps).
    pub throughput_kbps: T,
    /// Multiplier applied to estimates an algorithm derives from the history.
    pub throughput_scale: T,
    /// Raw per-chunk throughput samples, oldest first.
    pub throughput_history: &'a [T],
    /// Relative errors of past throughput predictions, oldest first.
    pub prediction_errors: &'a [T],
    pub prev_bitrate_kbps: T,
    pub ladder: &'a [T],
    pub chunk_s: T,
    pub ltb_s: T,
}

/// Scales the inputs the algorithm actually reads. The history is left raw.
pub fn apply_scalars<'a, T: Scalar>(inputs: &AbrInputs<'a, T>, s_b: T, s_r: T, kind: AbrKind) -> AbrInputs<'a, T> {
    let mut out = *inputs;
    if kind.uses_buffer() {
        out.buffer_s = out.buffer_s * s_b;
    }
    if kind.uses_throughput() {
        out.throughput_kbps = out.throughput_kbps * s_r;
        out.throughput_scale = out.throughput_scale * s_r;
    }
    out
}

fn floor_to_ladder<T: Scalar>(ladder: &[T], x: T) -> T {
    ladder.iter().copied().filter(|&b| b <= x).last().unwrap_or(ladder[0])
}

pub fn bba_select<T: Scalar>(inputs: &AbrInputs<'_, T>, reservoir_s: T, cushion_s: T) -> T {
    let ladder = inputs.ladder;
    let (lo, hi) = (ladder[0], ladder[ladder.len() - 1]);
    if inputs.buffer_s <= reservoir_s {
        return lo;
    }
    if inputs.buffer_s >= reservoir_s + cushion_s {
        return hi;
    }
    floor_to_ladder(ladder, lo + (hi - lo) * (inputs.buffer_s - reservoir_s) / cushion_s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BolaParams<T> {
    pub v: T,
    pub gamma_p: T,
}

/// BOLA-BASIC control parameters placing the first up-switch at `low_switch_s`
/// and the switch to the top bitrate at `top_switch_s` of buffer.
pub fn bola_params_for_switches<T: Scalar>(ladder: &[T], chunk_s: T, low_switch_s: T, top_switch_s: T) -> Result<BolaParams<T>, AbrError> {
    let m = ladder.len();
    if m < 2 {
        return Ok(BolaParams { v: T::one(), gamma_p: T::one() / chunk_s });
    }
    if !(T::zero() < low_switch_s && low_switch_s < top_switch_s) {
        return Err(AbrError::InvalidParams("need 0 < low switch < top switch".into()));
    }
    let v: Vec<T> = ladder.iter().map(|&b| (b / ladder[0]).ln()).collect();
    // Q at the m → m+1 boundary is V·(c_m + γ_p·α).
    let c = |i: usize| (v[i] * ladder[i + 1] - v[i + 1] * ladder[i]) / (ladder[i + 1] - ladder[i]);
    let (c_lo, c_hi) = (c(0), c(m - 2));
    let r = low_switch_s / top_switch_s;
    let g = (r * c_hi - c_lo) / (T::one() - r);
    let v_param = (top_switch_s / chunk_s) / (g + c_hi);
    if !(v_param > T::zero()) || !(g > T::zero()) {
        return Err(AbrError::InvalidParams("switch points not reachable on this ladder".into()));
    }
    Ok(BolaParams { v: v_param, gamma_p: g / chunk_s })
}

pub fn bola_select<T: Scalar>(inputs: &AbrInputs<'_, T>, v: T, gamma_p: T) -> T {
    let ladder = inputs.ladder;
    let alpha = inputs.chunk_s;
    let q = inputs.buffer_s / alpha;
    let mut best: Option<(T, T)> = None;
    for &b in ladder {
        let obj = (v * ((b / ladder[0]).ln() + gamma_p * alpha) - q) / (b * alpha);
        if best.is_none_or(|(s, _)| obj >= s) {
            best = Some((obj, b));
        }
    }
    match best {
        Some((s, b)) if s >= T::zero() => b,
        _ => ladder[0],
    }
}

pub fn harmonic_mean<T: Scalar>(history: &[T]) -> Result<T, AbrError> {
    if history.is_empty() {
        return Err(AbrError::EmptyHistory);
    }
    let inv: T = history.iter().map(|&x| x.recip()).sum();
    Ok(T::from_usize(history.len()).unwrap() / inv)
}

fn last_n<T>(xs: &[T], n: usize) -> &[T] {
    &xs[xs.len().saturating_sub(n)..]
}

pub const MPC_WINDOW: usize = 5;

/// Robust throughput estimate: harmonic mean of the recent samples discounted
/// by the worst recent relative prediction error.
pub fn robust_throughput_estimate<T: Scalar>(inputs: &AbrInputs<'_, T>) -> Result<T, AbrError> {
    let hm = harmonic_mean(last_n(inputs.throughput_history, MPC_WINDOW))?;
    let max_err = last_n(inputs.prediction_errors, MPC_WINDOW).iter().fold(T::zero(), |a, &e| a.max(e.abs()));
    Ok(hm * inputs.throughput_scale / (T::one() + max_err))
}

fn qualities<T: Scalar>(qoe: &QoEParams<T>, ladder: &[T]) -> Vec<T> {
    ladder
        .iter()
        .map(|&b| match qoe.quality {
            QualityKind::Linear => b / T::lit(1000.0),
            QualityKind::Log => (b / ladder[0]).ln(),
        })
        .collect()
}

struct MpcCtx<'a, T> {
    ladder: &'a [T],
    q: Vec<T>,
    dl: Vec<T>,
    alpha: T,
    horizon: usize,
    omega: T,
    rho: T,
    raw: bool,
}

impl<T: Scalar> MpcCtx<'_, T> {
    fn switch(&self, i: usize, prev_q: T, prev_b: T) -> T {
        if self.raw {
            (self.ladder[i] - prev_b).abs()
        } else {
            (self.q[i] - prev_q).abs()
        }
    }

    /// Best total over the remaining steps; no allocation.
    fn best_tail(&self, depth: usize, buffer: T, prev_q: T, prev_b: T) -> T {
        if depth == self.horizon {
            return T::zero();
        }
        let mut best = T::neg_infinity();
        for i in 0..self.ladder.len() {
            let (step, next_buf) = self.step(i, buffer, prev_q, prev_b);
            let total = step + self.best_tail(depth + 1, next_buf, self.q[i], self.ladder[i]);
            if total > best {
                best = total;
            }
        }
        best
    }

    fn step(&self, i: usize, buffer: T, prev_q: T, prev_b: T) -> (T, T) {
        let dl = self.dl[i];
        let rebuf = (dl - buffer).max(T::zero());
        let next_buf = (buffer - dl).max(T::zero()) + self.alpha;
        (self.q[i] - self.omega * rebuf - self.rho * self.switch(i, prev_q, prev_b), next_buf)
    }
}

/// First bitrate of the best `horizon`-chunk plan under the robust estimate.
/// Ties go to the lower first bitrate.
pub fn robust_mpc_select<T: Scalar>(inputs: &AbrInputs<'_, T>, horizon: usize, qoe: &QoEParams<T>) -> Result<T, AbrError> {
    let ladder = inputs.ladder;
    if ladder.len() == 1 || horizon == 0 {
        return Ok(ladder[0]);
    }
    let est = robust_throughput_estimate(inputs)?;
    let q = qualities(qoe, ladder);
    let dl = ladder.iter().map(|&b| b * inputs.chunk_s / est).collect();
    let prev_b = inputs.prev_bitrate_kbps;
    let prev_q = ladder.iter().position(|&b| b == prev_b).map(|i| q[i]).ok_or(PlayerError::UnknownBitrate(prev_b.as_f64()))?;
    let ctx = MpcCtx { ladder, q, dl, alpha: inputs.chunk_s, horizon, omega: qoe.omega, rho: qoe.rho, raw: qoe.smoothness == SmoothnessScale::RawKbps };
    let mut best = (T::neg_infinity(), ladder[0]);
    for (i, &b) in ladder.iter().enumerate() {
        let (step, next_buf) = ctx.step(i, inputs.buffer_s, prev_q, prev_b);
        let total = step + ctx.best_tail(1, next_buf, ctx.q[i], b);
        if total > best.0 {
            best = (total, b);
        }
    }
    Ok(best.1)
}

pub fn rate_select<T: Scalar>(inputs: &AbrInputs<'_, T>, safety: T) -> T {
    floor_to_ladder(inputs.ladder, safety * inputs.throughput_kbps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DynamicMode {
    #[default]
    Throughput,
    Buffer,
}

/// Throughput rule at low buffer, BOLA once the buffer reaches the switch
/// point; falls back only after dropping below `(1 − hysteresis)` of it.
pub fn dynamic_mode<T: Scalar>(buffer_s: T, switch_buffer_s: T, hysteresis: T, prev: DynamicMode) -> DynamicMode {
    match prev {
        DynamicMode::Throughput if buffer_s >= switch_buffer_s => DynamicMode::Buffer,
        DynamicMode::Buffer if buffer_s < switch_buffer_s * (T::one() - hysteresis) => DynamicMode::Throughput,
        m => m,
    }
}

pub fn dynamic_select<T: Scalar>(inputs: &AbrInputs<'_, T>, params: &AbrParams<T>, prev: DynamicMode) -> (T, DynamicMode) {
    let mode = dynamic_mode(inputs.buffer_s, params.dynamic_switch_s, params.dynamic_hysteresis, prev);
    let b = match mode {
        DynamicMode::Buffer => bola_select(inputs, params.bola.v, params.bola.gamma_p),
        DynamicMode::Throughput => rate_select(inputs, params.rate_safety),
    };
    (b, mode)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbrParams<T> {
    pub bba_reservoir_s: T,
    pub bba_cushion_s: T,
    pub bola: BolaParams<T>,
    pub rate_safety: T,
    pub dynamic_switch_s: T,
    /// Fraction of the switch point.
    pub dynamic_hysteresis: T,
    pub mpc_horizon: usize,
}

impl<T: Scalar> AbrParams<T> {
    /// Defaults for a 3-s latency target on the standard ladder.
    pub fn live_defaults(ladder: &[T], chunk_s: T) -> Self {
        Self {
            bba_reservoir_s: T::one(),
            bba_cushion_s: T::lit(2.0),
            bola: bola_params_for_switches(ladder, chunk_s, T::lit(0.5), T::lit(2.5)).unwrap_or(BolaParams { v: T::one(), gamma_p: T::one() }),
            rate_safety: T::lit(0.9),
            dynamic_switch_s: T::lit(1.5),
            dynamic_hysteresis: T::lit(0.1),
            mpc_horizon: 5,
        }
    }

    pub fn validate(&self) -> Result<(), AbrError> {
        let bad = |m: &str| Err(AbrError::InvalidParams(m.into()));
        if !(self.bba_reservoir_s >= T::zero()) || !(self.bba_cushion_s > T::zero()) {
            return bad("BBA needs reservoir >= 0 and cushion > 0");
        }
        if !(self.bola.v > T::zero()) || !(self.bola.gamma_p > T::zero()) {
            return bad("BOLA needs V > 0 and gamma_p > 0");
        }
        if !(self.rate_safety > T::zero() && self.rate_safety <= T::one()) {
            return bad("rate safety must lie in (0, 1]");
        }
        if !(self.dynamic_switch_s > T::zero()) || !(self.dynamic_hysteresis >= T::zero() && self.dynamic_hysteresis < T::one()) {
            return bad("dynamic needs switch > 0 and hysteresis in [0, 1)");
        }
        if self.mpc_horizon == 0 {
            return bad("MPC horizon must be at least 1");
        }
        Ok(())
    }
}

/// Runs `kind` on `inputs`. `mode` is the Dynamic algorithm's previous mode;
/// the returned mode is what it should be next time.
pub fn select<T: Scalar>(
    kind: AbrKind,
    params: &AbrParams<T>,
    inputs: &AbrInputs<'_, T>,
    qoe: &QoEParams<T>,
    mode: DynamicMode,
) -> Result<(T, DynamicMode), AbrError> {
    Ok(match kind {
        AbrKind::BufferBased(BufferBased::Bba) => (bba_select(inputs, params.bba_reservoir_s, params.bba_cushion_s), mode),
        AbrKind::BufferBased(BufferBased::Bola) => (bola_select(inputs, params.bola.v, params.bola.gamma_p), mode),
        AbrKind::ThroughputBased(ThroughputBased::Rate) => (rate_select(inputs, params.rate_safety), mode),
        AbrKind::Hybrid(Hybrid::RobustMpc) => (robust_mpc_select(inputs, params.mpc_horizon, qoe)?, mode),
        AbrKind::Hybrid(Hybrid::Dynamic) => dynamic_select(inputs, params, mode),
    })
}
