//! The SARA controller: a particle swarm over (buffer scalar, throughput
//! scalar, playback speed) evaluated once per chunk, and the session loop
//! that wraps an unmodified ABR with it.

use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::abr::{apply_scalars, harmonic_mean, select, AbrError, AbrInputs, AbrKind, AbrParams, DynamicMode, MPC_WINDOW};
use crate::network::{NetworkError, NetworkTrace};
use crate::player::{
    advance_playback, chunk_qoe, max_downloadable_chunks, rebuffer_duration, OutagePrediction, PlayerError, PlayerState, QoEParams,
    VideoManifest, SPEED_MAX, SPEED_MIN,
};
use crate::predictor::OutagePredictor;
use crate::scalar::{clip, Scalar};

#[derive(Debug, Error)]
pub enum SaraError {
    #[error(transparent)]
    Abr(#[from] AbrError),
    #[error(transparent)]
    Player(#[from] PlayerError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid PSO parameters: {0}")]
    InvalidParams(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

const OFFSET_FLOOR: f64 = -0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlDecision<T> {
    pub s_b: T,
    pub s_r: T,
    pub beta: T,
}

impl<T: Scalar> ControlDecision<T> {
    pub fn new(s_b: T, s_r: T, beta: T) -> Self {
        Self { s_b: clip(s_b, T::zero(), T::one()), s_r: clip(s_r, T::zero(), T::one()), beta: clip(beta, T::lit(SPEED_MIN), T::lit(SPEED_MAX)) }
    }

    pub fn neutral() -> Self {
        Self { s_b: T::one(), s_r: T::one(), beta: T::one() }
    }

    fn from_vec(v: [T; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    fn to_vec(self) -> [T; 3] {
        [self.s_b, self.s_r, self.beta]
    }
}

fn bounds<T: Scalar>() -> [(T, T); 3] {
    [(T::zero(), T::one()), (T::zero(), T::one()), (T::lit(SPEED_MIN), T::lit(SPEED_MAX))]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle<T> {
    pub pos: [T; 3],
    pub vel: [T; 3],
    pub best_pos: [T; 3],
    pub best_score: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsoParams<T> {
    pub iterations: usize,
    pub particles: usize,
    /// Upper end of the initial velocity range.
    pub aggressiveness: T,
    pub w_inertia: T,
    pub w_personal: T,
    pub w_global: T,
    /// Also shift the speed coordinate by the buffer-pressure offset.
    pub offset_on_speed: bool,
    /// Feed θ the scaled throughput (otherwise the raw one).
    pub scaled_theta: bool,
    /// Skip the swarm and keep (1, 1, 1) when nothing is predicted and LtB is
    /// at or under target.
    pub neutral_gate: bool,
    /// Finish with an exact search over speed for the winning scalars, and
    /// relax the scalars to 1 where that scores no worse.
    pub polish_speed: bool,
    /// After the swarm, sweep s_b and then s_r over this many even steps of
    /// [0, 1] from the incumbent, keeping strict improvements. 0 disables.
    pub coordinate_sweep: usize,
    /// Horizon over which the latency term projects the speed's effect.
    pub latency_lookahead_s: T,
    /// Count the refetch of one chunk after reconnecting as part of the outage.
    pub refetch_margin: bool,
}

impl<T: Scalar> Default for PsoParams<T> {
    fn default() -> Self {
        Self {
            iterations: 20,
            particles: 75,
            aggressiveness: T::lit(0.1),
            w_inertia: T::lit(0.7),
            w_personal: T::lit(1.5),
            w_global: T::lit(1.5),
            offset_on_speed: false,
            scaled_theta: true,
            neutral_gate: true,
            polish_speed: true,
            coordinate_sweep: 64,
            latency_lookahead_s: T::lit(4.0),
            refetch_margin: true,
        }
    }
}

impl<T: Scalar> PsoParams<T> {
    pub fn validate(&self) -> Result<(), SaraError> {
        if self.particles == 0 {
            return Err(SaraError::InvalidParams("particles must be at least 1".into()));
        }
        for (name, v) in [("aggressiveness", self.aggressiveness), ("w_inertia", self.w_inertia), ("w_personal", self.w_personal), ("w_global", self.w_global), ("latency_lookahead_s", self.latency_lookahead_s)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(SaraError::InvalidParams(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Pushes the scalars down when the buffer will not last until the outage.
pub fn buffer_pressure_offset<T: Scalar>(buffer_s: T, o: &OutagePrediction<T>) -> T {
    if !o.present || buffer_s >= o.o_t_s {
        return T::zero();
    }
    if buffer_s <= T::zero() {
        return T::lit(OFFSET_FLOOR);
    }
    ((buffer_s - o.o_t_s) / buffer_s).max(T::lit(OFFSET_FLOOR))
}

/// Everything a candidate decision is scored against.
#[derive(Clone, Copy, Debug)]
pub struct ScoreContext<'a, T> {
    pub state: &'a PlayerState<T>,
    /// Unscaled ABR inputs.
    pub inputs: &'a AbrInputs<'a, T>,
    pub prediction: &'a OutagePrediction<T>,
    pub kind: AbrKind,
    pub abr: &'a AbrParams<T>,
    pub qoe: &'a QoEParams<T>,
    pub mode: DynamicMode,
    pub scaled_theta: bool,
    pub latency_lookahead_s: T,
    pub refetch_margin: bool,
}

impl<'a, T: Scalar> ScoreContext<'a, T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: &'a PlayerState<T>,
        inputs: &'a AbrInputs<'a, T>,
        prediction: &'a OutagePrediction<T>,
        kind: AbrKind,
        abr: &'a AbrParams<T>,
        qoe: &'a QoEParams<T>,
        mode: DynamicMode,
        pso: &PsoParams<T>,
    ) -> Self {
        Self {
            state,
            inputs,
            prediction,
            kind,
            abr,
            qoe,
            mode,
            scaled_theta: pso.scaled_theta,
            latency_lookahead_s: pso.latency_lookahead_s,
            refetch_margin: pso.refetch_margin,
        }
    }

    /// θ and the outage as the score sees it, for bitrate `b`.
    fn outage_terms(&self, b: T, scaled: &AbrInputs<'_, T>) -> (usize, OutagePrediction<T>) {
        let o = *self.prediction;
        let xi = if self.scaled_theta { scaled.throughput_kbps } else { self.inputs.throughput_kbps };
        let theta = max_downloadable_chunks(xi, o.o_t_s, b, self.inputs.chunk_s);
        let xi_raw = self.inputs.throughput_kbps;
        let refetch = if self.refetch_margin && xi_raw > T::zero() {
            let this_chunk = b * self.inputs.chunk_s / xi_raw;
            // A chunk still in flight at the onset has to be finished first;
            // otherwise assume the player keeps its current bitrate.
            if this_chunk > o.o_t_s { this_chunk } else { self.state.prev_bitrate_kbps * self.inputs.chunk_s / xi_raw }
        } else {
            T::zero()
        };
        (theta, OutagePrediction { o_d_s: o.o_d_s + refetch, ..o })
    }
}

/// One-chunk QoE the wrapped ABR would earn under `d`.
pub fn candidate_score<T: Scalar>(d: &ControlDecision<T>, ctx: &ScoreContext<'_, T>) -> Result<T, SaraError> {
    let scaled = apply_scalars(ctx.inputs, d.s_b, d.s_r, ctx.kind);
    let (b, _) = select(ctx.kind, ctx.abr, &scaled, ctx.qoe, ctx.mode)?;
    Ok(score_with_bitrate(d.beta, b, &scaled, ctx)?)
}

fn score_with_bitrate<T: Scalar>(beta: T, b: T, scaled: &AbrInputs<'_, T>, ctx: &ScoreContext<'_, T>) -> Result<T, PlayerError> {
    let alpha = ctx.inputs.chunk_s;
    let rebuffer = if ctx.prediction.present {
        let (theta, o) = ctx.outage_terms(b, scaled);
        rebuffer_duration(ctx.inputs.buffer_s, theta, alpha, beta, &o, ctx.qoe.gamma_s)
    } else {
        T::zero()
    };
    let ltb = ctx.state.ltb_s + (T::one() - beta) * ctx.latency_lookahead_s;
    chunk_qoe(ctx.qoe, ctx.inputs.ladder, b, ctx.state.prev_bitrate_kbps, beta, ctx.state.speed, rebuffer, ltb)
}

/// The score is piecewise linear-plus-convex in β for a fixed bitrate, so
/// its maximum sits at a bound or at one of the kinks.
fn polish_speed<T: Scalar>(best: ControlDecision<T>, best_score: T, ctx: &ScoreContext<'_, T>) -> Result<(ControlDecision<T>, T), SaraError> {
    let scaled = apply_scalars(ctx.inputs, best.s_b, best.s_r, ctx.kind);
    let (b, _) = select(ctx.kind, ctx.abr, &scaled, ctx.qoe, ctx.mode)?;
    let mut candidates = vec![T::lit(SPEED_MIN), T::lit(SPEED_MAX), T::one(), ctx.state.speed];
    if ctx.latency_lookahead_s > T::zero() {
        candidates.push(T::one() + (ctx.state.ltb_s - ctx.qoe.ltb0_s) / ctx.latency_lookahead_s);
    }
    if ctx.prediction.present {
        let (theta, o) = ctx.outage_terms(b, &scaled);
        let content = ctx.inputs.buffer_s + T::from_usize(theta).unwrap() * ctx.inputs.chunk_s;
        let need = o.o_t_s + o.o_d_s + ctx.qoe.gamma_s;
        if need > T::zero() {
            candidates.push(content / need);
        }
    }
    let (mut out, mut out_score) = (best, best_score);
    for beta in candidates {
        let beta = clip(beta, T::lit(SPEED_MIN), T::lit(SPEED_MAX));
        let s = score_with_bitrate(beta, b, &scaled, ctx)?;
        if s > out_score {
            out = ControlDecision { beta, ..best };
            out_score = s;
        }
    }
    Ok((out, out_score))
}

/// Speed polish on the global best and on every personal best, then hands
/// control back to the ABR wherever that costs nothing: scalars return to 1
/// if the score does not drop.
fn refine<T: Scalar>(best: ControlDecision<T>, best_score: T, swarm: &[Particle<T>], ctx: &ScoreContext<'_, T>) -> Result<(ControlDecision<T>, T), SaraError> {
    let (mut best, mut best_score) = polish_speed(best, best_score, ctx)?;
    for p in swarm {
        let (cand, score) = polish_speed(ControlDecision::from_vec(p.best_pos), p.best_score, ctx)?;
        if score > best_score {
            (best, best_score) = (cand, score);
        }
    }
    for (s_b, s_r) in [(T::one(), T::one()), (T::one(), best.s_r), (best.s_b, T::one())] {
        if (s_b, s_r) == (best.s_b, best.s_r) {
            continue;
        }
        let cand = ControlDecision { s_b, s_r, beta: best.beta };
        let score = candidate_score(&cand, ctx)?;
        let (cand, score) = polish_speed(cand, score, ctx)?;
        if score >= best_score {
            return Ok((cand, score));
        }
    }
    Ok((best, best_score))
}

fn coordinate_sweep<T: Scalar>(mut best: ControlDecision<T>, mut best_score: T, steps: usize, ctx: &ScoreContext<'_, T>) -> Result<(ControlDecision<T>, T), SaraError> {
    let n = T::from_usize(steps).unwrap();
    for axis in 0..2 {
        let start = best.to_vec();
        for j in 0..=steps {
            let mut pos = start;
            pos[axis] = T::from_usize(j).unwrap() / n;
            let cand = ControlDecision::from_vec(pos);
            let score = candidate_score(&cand, ctx)?;
            if score > best_score {
                (best, best_score) = (cand, score);
            }
        }
    }
    Ok((best, best_score))
}

/// Result of one optimizer call, with the global-best score after the
/// initial swarm and after every iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome<T> {
    pub decision: ControlDecision<T>,
    pub score: T,
    pub best_history: Vec<T>,
    pub swarm_ran: bool,
}

pub fn sara_optimize<T: Scalar, R: Rng + ?Sized>(
    ctx: &ScoreContext<'_, T>,
    pso: &PsoParams<T>,
    rng: &mut R,
) -> Result<OptimizeOutcome<T>, SaraError> {
    let neutral = ControlDecision::neutral();
    let neutral_score = candidate_score(&neutral, ctx)?;
    if pso.neutral_gate && !ctx.prediction.present && ctx.state.ltb_s <= ctx.qoe.ltb0_s {
        return Ok(OptimizeOutcome { decision: neutral, score: neutral_score, best_history: vec![neutral_score], swarm_ran: false });
    }
    let bnd = bounds::<T>();
    let offset = buffer_pressure_offset(ctx.inputs.buffer_s, ctx.prediction);
    let shift = [offset, offset, if pso.offset_on_speed { offset } else { T::zero() }];

    let mut g_pos = neutral.to_vec();
    let mut g_score = neutral_score;
    let mut swarm = Vec::with_capacity(pso.particles);
    for _ in 0..pso.particles {
        let mut pos = [T::zero(); 3];
        let mut vel = [T::zero(); 3];
        for d in 0..3 {
            pos[d] = T::sample_between(rng, bnd[d].0, bnd[d].1);
            vel[d] = T::sample_between(rng, T::zero(), pso.aggressiveness);
        }
        let score = candidate_score(&ControlDecision::from_vec(pos), ctx)?;
        swarm.push(Particle { pos, vel, best_pos: pos, best_score: score });
    }
    let absorb = |swarm: &[Particle<T>], g_pos: &mut [T; 3], g_score: &mut T| {
        for p in swarm {
            if p.best_score > *g_score {
                *g_score = p.best_score;
                *g_pos = p.best_pos;
            }
        }
    };
    absorb(&swarm, &mut g_pos, &mut g_score);
    let mut history = Vec::with_capacity(pso.iterations + 1);
    history.push(g_score);

    for _ in 0..pso.iterations {
        for p in swarm.iter_mut() {
            for d in 0..3 {
                let r1 = T::sample_unit(rng);
                let r2 = T::sample_unit(rng);
                p.vel[d] = pso.w_inertia * p.vel[d] + pso.w_personal * r1 * (p.best_pos[d] - p.pos[d]) + pso.w_global * r2 * (g_pos[d] - p.pos[d]);
                p.pos[d] = clip(p.pos[d] + p.vel[d] + shift[d], bnd[d].0, bnd[d].1);
            }
            let score = candidate_score(&ControlDecision::from_vec(p.pos), ctx)?;
            if score > p.best_score {
                p.best_score = score;
                p.best_pos = p.pos;
            }
        }
        absorb(&swarm, &mut g_pos, &mut g_score);
        history.push(g_score);
    }

    let mut decision = ControlDecision::from_vec(g_pos);
    if pso.polish_speed {
        (decision, g_score) = refine(decision, g_score, &swarm, ctx)?;
    }
    if pso.coordinate_sweep > 0 {
        let (swept, score) = coordinate_sweep(decision, g_score, pso.coordinate_sweep, ctx)?;
        if score > g_score {
            (decision, g_score) = if pso.polish_speed { polish_speed(swept, score, ctx)? } else { (swept, score) };
        }
    }
    Ok(OptimizeOutcome { decision, score: g_score, best_history: history, swarm_ran: true })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChunkRecord<T> {
    pub k: usize,
    /// Time the chunk was requested.
    pub wall_t_s: T,
    pub bitrate_kbps: T,
    pub s_b: T,
    pub s_r: T,
    pub beta: T,
    pub buffer_s: T,
    pub ltb_s: T,
    pub rebuffer_chunk_s: T,
    pub qoe_chunk: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionLog<T> {
    pub records: Vec<ChunkRecord<T>>,
    /// Chunks at which the swarm actually ran.
    pub optimizer_runs: usize,
}

pub const CHUNK_CSV_HEADER: &str = "k,wall_t_s,bitrate_kbps,s_b,s_r,beta,buffer_s,ltb_s,rebuffer_chunk_s,qoe_chunk";

impl<T: Scalar> SessionLog<T> {
    pub fn rebuffer_total_s(&self) -> T {
        self.records.iter().map(|r| r.rebuffer_chunk_s).sum()
    }

    /// Stall episodes: maximal runs of chunks that rebuffered.
    pub fn rebuffer_events(&self) -> usize {
        let mut events = 0;
        let mut stalled = false;
        for r in &self.records {
            let now = r.rebuffer_chunk_s > T::zero();
            events += usize::from(now && !stalled);
            stalled = now;
        }
        events
    }

    pub fn session_qoe(&self) -> T {
        self.records.iter().map(|r| r.qoe_chunk).sum()
    }

    pub fn bitrates(&self) -> Vec<T> {
        self.records.iter().map(|r| r.bitrate_kbps).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CHUNK_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.k,
                r.wall_t_s.as_f64(),
                r.bitrate_kbps.as_f64(),
                r.s_b.as_f64(),
                r.s_r.as_f64(),
                r.beta.as_f64(),
                r.buffer_s.as_f64(),
                r.ltb_s.as_f64(),
                r.rebuffer_chunk_s.as_f64(),
                r.qoe_chunk.as_f64()
            )?;
        }
        Ok(())
    }
}

/// How a session is driven: the wrapped ABR and, when present, SARA.
#[derive(Clone, Copy, Debug)]
pub struct SessionSetup<'a, T> {
    pub manifest: &'a VideoManifest<T>,
    pub trace: &'a NetworkTrace<T>,
    pub kind: AbrKind,
    pub abr: &'a AbrParams<T>,
    pub qoe: &'a QoEParams<T>,
    /// `None` runs the bare ABR.
    pub sara: Option<&'a PsoParams<T>>,
}

/// Plays every chunk of the manifest over the trace. Chunk `k` is published
/// at `k·α` (the player joins already at its target latency), so a player
/// that is ahead of the live edge idles until then.
pub fn run_session<T: Scalar, P: OutagePredictor<T> + ?Sized, R: Rng + ?Sized>(
    setup: &SessionSetup<'_, T>,
    predictor: &mut P,
    rng: &mut R,
) -> Result<SessionLog<T>, SaraError> {
    let SessionSetup { manifest, trace, kind, abr, qoe, sara } = *setup;
    qoe.validate()?;
    abr.validate()?;
    if let Some(p) = sara {
        p.validate()?;
    }
    let alpha = manifest.chunk_s;
    let ladder = &manifest.ladder_kbps;
    let mut state = PlayerState::warm_start(manifest, qoe.ltb0_s);
    let mut history = vec![trace.nominal_bandwidth(T::zero())];
    let mut errors: Vec<T> = Vec::new();
    let mut mode = DynamicMode::default();
    let mut records = Vec::with_capacity(manifest.total_chunks);
    let mut optimizer_runs = 0;

    for k in 0..manifest.total_chunks {
        let rebuffer_before = state.rebuffer_total_s;
        let publish = T::from_usize(k).unwrap() * alpha;
        if state.wall_clock_s < publish {
            state = advance_playback(&state, publish - state.wall_clock_s, T::zero());
        }
        let t = state.wall_clock_s;
        let recent = &history[history.len().saturating_sub(MPC_WINDOW)..];
        let inputs = AbrInputs {
            buffer_s: state.buffer_s,
            throughput_kbps: *history.last().unwrap(),
            throughput_scale: T::one(),
            throughput_history: recent,
            prediction_errors: &errors[errors.len().saturating_sub(MPC_WINDOW)..],
            prev_bitrate_kbps: state.prev_bitrate_kbps,
            ladder,
            chunk_s: alpha,
            ltb_s: state.ltb_s,
        };

        let decision = match sara {
            Some(pso) => {
                let prediction = predictor.predict(t);
                let ctx = ScoreContext::new(&state, &inputs, &prediction, kind, abr, qoe, mode, pso);
                let out = sara_optimize(&ctx, pso, rng)?;
                optimizer_runs += usize::from(out.swarm_ran);
                out.decision
            }
            None => ControlDecision::neutral(),
        };
        let fed = if decision.s_b < T::one() || decision.s_r < T::one() { apply_scalars(&inputs, decision.s_b, decision.s_r, kind) } else { inputs };
        let (bitrate, next_mode) = select(kind, abr, &fed, qoe, mode)?;
        mode = next_mode;
        let predicted = harmonic_mean(recent)?;

        state.prev_speed = state.speed;
        state.speed = decision.beta;
        let dl = trace.download_chunk(t, bitrate * alpha)?;
        state = advance_playback(&state, dl.finish_t_s - t, T::zero());
        state = advance_playback(&state, T::zero(), alpha);
        state.next_chunk = k + 1;

        let measured = dl.avg_throughput_kbps;
        errors.push((predicted - measured).abs() / measured);
        history.push(measured);

        let rebuffer = state.rebuffer_total_s - rebuffer_before;
        let q = chunk_qoe(qoe, ladder, bitrate, state.prev_bitrate_kbps, state.speed, state.prev_speed, rebuffer, state.ltb_s)?;
        state.prev_bitrate_kbps = bitrate;
        records.push(ChunkRecord {
            k,
            wall_t_s: t,
            bitrate_kbps: bitrate,
            s_b: decision.s_b,
            s_r: decision.s_r,
            beta: decision.beta,
            buffer_s: state.buffer_s,
            ltb_s: state.ltb_s,
            rebuffer_chunk_s: rebuffer,
            qoe_chunk: q,
        });
    }
    Ok(SessionLog { records, optimizer_runs })
}
