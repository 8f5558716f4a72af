//! Live player model: buffer, latency to broadcaster (LtB), playback speed,
//! and the per-chunk QoE terms.

use thiserror::Error;

use crate::scalar::Scalar;

pub const SPEED_MIN: f64 = 0.95;
pub const SPEED_MAX: f64 = 1.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlayerError {
    #[error("bitrate {0} kbps is not on the ladder")]
    UnknownBitrate(f64),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid QoE parameters: {0}")]
    InvalidQoe(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoManifest<T> {
    /// strictly increasing, kbps
    pub ladder_kbps: Vec<T>,
    pub chunk_s: T,
    pub total_chunks: usize,
}

impl<T: Scalar> VideoManifest<T> {
    pub fn new(ladder_kbps: Vec<T>, chunk_s: T, total_chunks: usize) -> Result<Self, PlayerError> {
        if ladder_kbps.is_empty() {
            return Err(PlayerError::InvalidManifest("empty bitrate ladder".into()));
        }
        if ladder_kbps.iter().any(|&b| !(b > T::zero()) || !b.is_finite()) {
            return Err(PlayerError::InvalidManifest("bitrates must be positive".into()));
        }
        if ladder_kbps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PlayerError::InvalidManifest("ladder must be strictly increasing".into()));
        }
        if !(chunk_s > T::zero()) {
            return Err(PlayerError::InvalidManifest("chunk duration must be positive".into()));
        }
        if total_chunks == 0 {
            return Err(PlayerError::InvalidManifest("at least one chunk is required".into()));
        }
        Ok(Self { ladder_kbps, chunk_s, total_chunks })
    }

    /// {1000, 2500, 5000, 8000} kbps, 500 ms chunks.
    pub fn standard(duration_s: T) -> Self {
        let chunk_s = T::lit(0.5);
        let total = (duration_s / chunk_s).ceil().to_usize().unwrap_or(1).max(1);
        Self::new([1000.0, 2500.0, 5000.0, 8000.0].map(T::lit).to_vec(), chunk_s, total).expect("standard manifest")
    }

    pub fn lowest(&self) -> T {
        self.ladder_kbps[0]
    }

    pub fn highest(&self) -> T {
        *self.ladder_kbps.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QualityKind {
    /// q(b) = b / 1000
    Linear,
    /// q(b) = ln(b / b_min)
    Log,
}

/// Scale of the bitrate-switch penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothnessScale {
    /// |q(b_k) − q(b_{k−1})|
    Quality,
    /// |b_k − b_{k−1}| in kbps
    RawKbps,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QoEParams<T> {
    pub omega: T,
    pub rho: T,
    pub eta: T,
    pub iota: T,
    pub gamma_s: T,
    pub ltb0_s: T,
    pub quality: QualityKind,
    pub smoothness: SmoothnessScale,
}

impl<T: Scalar> QoEParams<T> {
    /// Linear quality, ω = 4.33.
    pub fn linear() -> Self {
        Self {
            omega: T::lit(4.33),
            rho: T::one(),
            eta: T::one(),
            iota: T::one(),
            gamma_s: T::lit(2.0),
            ltb0_s: T::lit(3.0),
            quality: QualityKind::Linear,
            smoothness: SmoothnessScale::Quality,
        }
    }

    /// Log quality, ω = 2.66.
    pub fn log() -> Self {
        Self { omega: T::lit(2.66), quality: QualityKind::Log, ..Self::linear() }
    }

    pub fn validate(&self) -> Result<(), PlayerError> {
        for (name, v) in [("omega", self.omega), ("rho", self.rho), ("eta", self.eta), ("iota", self.iota), ("gamma_s", self.gamma_s)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(PlayerError::InvalidQoe(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.ltb0_s > T::zero()) {
            return Err(PlayerError::InvalidQoe("ltb0_s must be positive".into()));
        }
        Ok(())
    }
}

/// Forecast of the next outage: starts in `o_t_s`, lasts `o_d_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutagePrediction<T> {
    pub present: bool,
    pub o_t_s: T,
    pub o_d_s: T,
}

impl<T: Scalar> OutagePrediction<T> {
    pub fn none() -> Self {
        Self { present: false, o_t_s: T::zero(), o_d_s: T::zero() }
    }

    pub fn at(o_t_s: T, o_d_s: T) -> Self {
        Self { present: true, o_t_s, o_d_s }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlayerState<T> {
    pub buffer_s: T,
    pub ltb_s: T,
    pub speed: T,
    pub prev_speed: T,
    pub prev_bitrate_kbps: T,
    pub rebuffer_total_s: T,
    pub wall_clock_s: T,
    pub next_chunk: usize,
}

impl<T: Scalar> PlayerState<T> {
    /// Player that has already been watching at the target latency: LtB at
    /// `ltb0_s`, buffer one chunk short of it (so the next chunk is already
    /// published), last chunk fetched at the lowest bitrate.
    pub fn warm_start(manifest: &VideoManifest<T>, ltb0_s: T) -> Self {
        Self {
            buffer_s: (ltb0_s - manifest.chunk_s).max(T::zero()),
            ltb_s: ltb0_s,
            speed: T::one(),
            prev_speed: T::one(),
            prev_bitrate_kbps: manifest.lowest(),
            rebuffer_total_s: T::zero(),
            wall_clock_s: T::zero(),
            next_chunk: 0,
        }
    }
}

pub fn quality<T: Scalar>(params: &QoEParams<T>, ladder: &[T], bitrate_kbps: T) -> Result<T, PlayerError> {
    if !ladder.contains(&bitrate_kbps) {
        return Err(PlayerError::UnknownBitrate(bitrate_kbps.as_f64()));
    }
    Ok(match params.quality {
        QualityKind::Linear => bitrate_kbps / T::lit(1000.0),
        QualityKind::Log => (bitrate_kbps / ladder[0]).ln(),
    })
}

/// θ: whole chunks that can be fetched before an outage `o_t_s` away, limited
/// both by throughput and by how fast the broadcaster publishes them.
pub fn max_downloadable_chunks<T: Scalar>(xi_kbps: T, o_t_s: T, bitrate_kbps: T, alpha_s: T) -> usize {
    if !(o_t_s > T::zero()) {
        return 0;
    }
    let by_rate = (xi_kbps * o_t_s / (bitrate_kbps * alpha_s)).floor();
    let by_live = (o_t_s / alpha_s).floor();
    by_rate.min(by_live).max(T::zero()).to_usize().unwrap_or(usize::MAX)
}

/// `(C + θα)/β − o_t − o_d − γ`; the outage is survivable iff this is ≥ 0.
fn post_outage_margin<T: Scalar>(buffer_s: T, theta: usize, alpha_s: T, beta: T, o: &OutagePrediction<T>, gamma_s: T) -> T {
    let content = buffer_s + T::from_usize(theta).unwrap() * alpha_s;
    content / beta - o.o_t_s - o.o_d_s - gamma_s
}

/// Whether at least `γ` seconds of buffer remain after the predicted outage.
pub fn buffer_health_ok<T: Scalar>(buffer_s: T, theta: usize, alpha_s: T, beta: T, o: &OutagePrediction<T>, gamma_s: T) -> bool {
    !o.present || post_outage_margin(buffer_s, theta, alpha_s, beta, o, gamma_s) >= T::zero()
}

/// Predicted stall `T_k = max(o_t + o_d + γ − (C + θα)/β, 0)`.
pub fn rebuffer_duration<T: Scalar>(buffer_s: T, theta: usize, alpha_s: T, beta: T, o: &OutagePrediction<T>, gamma_s: T) -> T {
    if !o.present {
        return T::zero();
    }
    (-post_outage_margin(buffer_s, theta, alpha_s, beta, o, gamma_s)).max(T::zero())
}

pub fn latency_penalty<T: Scalar>(ltb_s: T, ltb0_s: T) -> T {
    (ltb_s - ltb0_s).max(T::zero())
}

/// Q_k = q(b_k) − ωT_k − ρ·switch(b_k, b_{k−1}) − η|β_k − β_{k−1}| − ιL_k.
#[allow(clippy::too_many_arguments)]
pub fn chunk_qoe<T: Scalar>(
    params: &QoEParams<T>,
    ladder: &[T],
    bitrate_kbps: T,
    prev_bitrate_kbps: T,
    speed: T,
    prev_speed: T,
    rebuffer_s: T,
    ltb_s: T,
) -> Result<T, PlayerError> {
    let q = quality(params, ladder, bitrate_kbps)?;
    let switch = match params.smoothness {
        SmoothnessScale::Quality => (q - quality(params, ladder, prev_bitrate_kbps)?).abs(),
        SmoothnessScale::RawKbps => (bitrate_kbps - prev_bitrate_kbps).abs(),
    };
    Ok(q - params.omega * rebuffer_s
        - params.rho * switch
        - params.eta * (speed - prev_speed).abs()
        - params.iota * latency_penalty(ltb_s, params.ltb0_s))
}

pub fn session_qoe<T: Scalar>(per_chunk: &[T]) -> T {
    per_chunk.iter().copied().sum()
}

/// Evolves the player over `wall_dt_s` seconds after appending
/// `content_added_s` seconds of video. While content remains the buffer drains
/// at `speed` and LtB moves at `1 − speed`; once empty the player stalls and
/// both LtB and the rebuffer total grow at rate one.
pub fn advance_playback<T: Scalar>(state: &PlayerState<T>, wall_dt_s: T, content_added_s: T) -> PlayerState<T> {
    let mut s = *state;
    s.buffer_s = s.buffer_s + content_added_s;
    let drain_time = s.buffer_s / s.speed;
    let (playing, stalled) = if drain_time >= wall_dt_s { (wall_dt_s, T::zero()) } else { (drain_time, wall_dt_s - drain_time) };
    s.buffer_s = if stalled > T::zero() { T::zero() } else { (s.buffer_s - s.speed * playing).max(T::zero()) };
    s.ltb_s = s.ltb_s + (T::one() - s.speed) * playing + stalled;
    s.rebuffer_total_s = s.rebuffer_total_s + stalled;
    s.wall_clock_s = s.wall_clock_s + wall_dt_s;
    s
}
