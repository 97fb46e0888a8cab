use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::Rng;

use super::mask::dominance_mask;
use super::metrics::{feature_metrics, log_power_spectrum, MetricsRow};
use super::scenario::{perturb_scenario, ScenarioKind, ScenarioSpec, Scene};
use super::speech::synthetic_utterance;
use crate::dsp::{stft, FrameParams};
use crate::error::{Error, Result};
use crate::features::{compute_rsf, compute_sf, kernel_concentration, FeatureKind, PairSet};
use crate::mixer::{make_mixture, MixSpec, MixtureBundle, REFERENCE_CHANNEL};
use crate::par::*;
use crate::room::{
    ctf_from_rir, measure_rt60, simulate_rir, Absorption, ArrayGeometry, CtfFilter, Point, Rir, RoomSpec,
    DEFAULT_SPEED_OF_SOUND, PROTOCOL_ARRAY_OFFSETS, PROTOCOL_ROOM_MAX, PROTOCOL_ROOM_MIN,
};
use crate::seed;

/// A named decay-time range rooms are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub rt60: (f64, f64),
}

impl Band {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Band {
            name: name.to_string(),
            rt60: (lo, hi),
        }
    }

    pub fn weak() -> Self {
        Band::new("weak", 0.1, 0.6)
    }

    pub fn strong() -> Self {
        Band::new("strong", 0.5, 0.7)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub rooms: usize,
    pub mixtures_per_room: usize,
    pub bands: Vec<Band>,
    pub scenarios: Vec<ScenarioKind>,
    /// RSF frame counts; SF is always evaluated.
    pub ks: Vec<usize>,
    pub array_offsets: Vec<f64>,
    pub pairs: PairSet,
    pub sir_db: (f64, f64),
    pub overlap: (f64, f64),
    pub noise_snr_db: Option<f64>,
    pub utterance_seconds: f64,
    /// Accepted talker distance from the array centre.
    pub speaker_distance: (f64, f64),
    /// Minimum difference between the two talkers' angles to the array axis.
    pub min_separation_deg: f64,
    pub margin_db: f64,
    pub frame: FrameParams,
    pub absorption: Absorption,
    pub room_min: Point,
    pub room_max: Point,
    pub speed_of_sound: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            rooms: 20,
            mixtures_per_room: 5,
            bands: vec![Band::weak(), Band::strong()],
            scenarios: ScenarioKind::ALL.to_vec(),
            ks: vec![2, 10],
            array_offsets: PROTOCOL_ARRAY_OFFSETS.to_vec(),
            pairs: PairSet::symmetric(PROTOCOL_ARRAY_OFFSETS.len()).expect("eight microphones"),
            sir_db: (-6.0, 6.0),
            overlap: (0.5, 1.0),
            noise_snr_db: None,
            utterance_seconds: 2.5,
            speaker_distance: (0.5, 12.0),
            min_separation_deg: 20.0,
            margin_db: 3.0,
            frame: FrameParams::default(),
            absorption: Absorption::default(),
            room_min: PROTOCOL_ROOM_MIN,
            room_max: PROTOCOL_ROOM_MAX,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max) {
        return Err(Error::config(format!(
            "{name} range [{lo}, {hi}] must be ordered and within [{min}, {max}]"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Two rooms, two mixtures per band; enough to exercise every row.
    pub fn smoke(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            rooms: 2,
            mixtures_per_room: 2,
            bands: vec![Band::new("weak", 0.15, 0.3), Band::new("strong", 0.3, 0.4)],
            utterance_seconds: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.rooms == 0 || self.mixtures_per_room == 0 {
            return Err(Error::config("rooms and mixtures per room must be positive"));
        }
        if self.bands.is_empty() || self.scenarios.is_empty() {
            return Err(Error::config("at least one band and one scenario are required"));
        }
        let mut names: Vec<&str> = self.bands.iter().map(|b| b.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.bands.len() {
            return Err(Error::config("band names must be unique"));
        }
        for b in &self.bands {
            if b.name.is_empty() || !b.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::config(format!("band name '{}' must be alphanumeric", b.name)));
            }
            check_range(&format!("band {} rt60", b.name), b.rt60, 0.05, 5.0)?;
        }
        if self.ks.contains(&0) {
            return Err(Error::config("k values must be at least 1 frame"));
        }
        if self.array_offsets.len() < 2 {
            return Err(Error::config("the array needs at least two microphones"));
        }
        self.pairs.check(self.array_offsets.len())?;
        check_range("sir", self.sir_db, -60.0, 60.0)?;
        check_range("overlap", self.overlap, 0.5, 1.0)?;
        check_range("speaker distance", self.speaker_distance, 0.0, 100.0)?;
        if let Some(snr) = self.noise_snr_db {
            if snr.is_nan() {
                return Err(Error::config("noise SNR must be a number"));
            }
        }
        if !(self.utterance_seconds > 0.1 && self.utterance_seconds <= 30.0) {
            return Err(Error::config(format!(
                "utterance length {} s outside (0.1, 30]",
                self.utterance_seconds
            )));
        }
        if !(0.0..90.0).contains(&self.min_separation_deg) {
            return Err(Error::config("talker separation must be in [0, 90) degrees"));
        }
        if !(self.margin_db >= 0.0 && self.margin_db.is_finite()) {
            return Err(Error::config("dominance margin must be non-negative"));
        }
        for d in 0..3 {
            check_range("room size", (self.room_min[d], self.room_max[d]), 1.0, 50.0)?;
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(Error::config("speed of sound must be positive"));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.ks.iter().copied().max().unwrap_or(1)
    }
}

const PLACEMENT_ATTEMPTS: usize = 200;
const ROOM_ATTEMPTS: usize = 16;
const WALL_MARGIN: f64 = 0.5;
const TALKER_CLEARANCE: f64 = 0.3;

fn axis_angle(o: &Point) -> f64 {
    let d = (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt();
    (o[0] / d).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Random room in `band` with the array along x at a random position and two
/// talkers placed uniformly in the room, subject to the distance and
/// separation limits. Returns `None` if no placement fits.
pub fn sample_scene(config: &ExperimentConfig, band: &Band, seed: u64) -> Option<Scene> {
    let mut rng = seed::rng(seed);
    let mut dims = [0.0; 3];
    for d in 0..3 {
        dims[d] = rng.random_range(config.room_min[d]..=config.room_max[d]);
    }
    let rt60 = rng.random_range(band.rt60.0..=band.rt60.1);
    let mut room = RoomSpec::new(dims, rt60);
    room.speed_of_sound = config.speed_of_sound;
    let array = ArrayGeometry::linear([0.0; 3], &config.array_offsets).ok()?;
    let half = array.mic_positions.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
    let (x_lo, x_hi) = (WALL_MARGIN + half, dims[0] - WALL_MARGIN - half);
    if x_lo > x_hi || dims[1] < 2.0 * WALL_MARGIN {
        return None;
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let center = [
            rng.random_range(x_lo..=x_hi),
            rng.random_range(WALL_MARGIN..=dims[1] - WALL_MARGIN),
            rng.random_range(1.0..=1.6f64.min(dims[2] - WALL_MARGIN)),
        ];
        let talker = |rng: &mut seed::Rng| -> Point {
            let mut p = [0.0; 3];
            for d in 0..3 {
                p[d] = rng.random_range(TALKER_CLEARANCE..=dims[d] - TALKER_CLEARANCE) - center[d];
            }
            p
        };
        let target = talker(&mut rng);
        let interferer = talker(&mut rng);
        let in_range = |o: &Point| {
            let d = (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt();
            (config.speaker_distance.0..=config.speaker_distance.1).contains(&d)
        };
        if !in_range(&target) || !in_range(&interferer) {
            continue;
        }
        if (axis_angle(&target) - axis_angle(&interferer)).abs() < config.min_separation_deg {
            continue;
        }
        let scene = Scene {
            room,
            array_center: center,
            mic_offsets: array.mic_positions.clone(),
            target_offset: target,
            interferer_offset: interferer,
        };
        if scene.is_inside(TALKER_CLEARANCE) {
            return Some(scene);
        }
    }
    None
}

/// Zero-pads every channel so the CTF spans at least `frames` frames.
fn pad_for_frames(rir: &Rir, params: &FrameParams, frames: usize) -> Result<Rir> {
    let mut len = rir.len();
    while params.num_frames(len) < frames {
        len += params.hop;
    }
    if len == rir.len() {
        return Ok(rir.clone());
    }
    let mut taps = Array2::zeros((rir.channels(), len));
    taps.slice_mut(ndarray::s![.., ..rir.len()]).assign(&rir.taps);
    Rir::new(taps, rir.sample_rate)
}

/// Per-room acoustics diagnostics of the true target response.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomDiagnostics {
    pub band: String,
    pub room: usize,
    pub dims: Point,
    pub target_rt60: f64,
    pub measured_rt60: Option<f64>,
    /// `(k, per-channel concentration)` for k = 1 and every configured k.
    pub concentration: Vec<(usize, Vec<f64>)>,
}

impl RoomDiagnostics {
    pub fn concentration_at(&self, k: usize) -> Option<&[f64]> {
        self.concentration
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub band: String,
    pub room: usize,
    pub mixture: Option<usize>,
    pub message: String,
}

/// One feature map kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct RawArtifact {
    pub band: String,
    pub room: usize,
    pub mixture: usize,
    pub scenario: Option<ScenarioKind>,
    /// `mask`, `target_lps`, `sf`, or `rsf_k<k>`.
    pub name: String,
    pub values: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RowKey {
    pub band: usize,
    pub scenario: ScenarioKind,
    pub feature: FeatureKind,
    pub k: Option<usize>,
}

/// Mixture-averaged metrics for one (band, scenario, feature, k).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub band: String,
    pub scenario: ScenarioKind,
    pub feature: FeatureKind,
    pub k: Option<usize>,
    pub mixtures: usize,
    pub n_target: usize,
    pub n_interferer: usize,
    pub mean_on_target: Option<f64>,
    pub mean_on_interferer: Option<f64>,
    pub auc: Option<f64>,
    pub lps_correlation: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    mixtures: usize,
    n_target: usize,
    n_interferer: usize,
    sums: [(f64, usize); 4],
}

impl Accumulator {
    fn push(&mut self, m: &MetricsRow) {
        self.mixtures += 1;
        self.n_target += m.n_target;
        self.n_interferer += m.n_interferer;
        let vals = [m.mean_on_target, m.mean_on_interferer, m.auc, m.lps_correlation];
        for (slot, v) in self.sums.iter_mut().zip(vals) {
            if let Some(v) = v {
                slot.0 += v;
                slot.1 += 1;
            }
        }
    }

    fn mean(&self, i: usize) -> Option<f64> {
        let (s, n) = self.sums[i];
        (n > 0).then(|| s / n as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub rooms: Vec<RoomDiagnostics>,
    pub failures: Vec<Failure>,
    pub raw: Vec<RawArtifact>,
}

pub const REPORT_HEADER: &str =
    "band,scenario,feature,k,mixtures,n_target,n_interferer,mean_on_target,mean_on_interferer,auc,lps_correlation";
pub const ROOMS_HEADER: &str = "band,room,lx,ly,lz,target_rt60,measured_rt60,k,concentration_mean,concentration_min";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl ExperimentReport {
    pub fn row(
        &self,
        band: &str,
        scenario: ScenarioKind,
        feature: FeatureKind,
        k: Option<usize>,
    ) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.band == band && r.scenario == scenario && r.feature == feature && r.k == k)
    }

    /// Metrics table, one line per row, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.band,
                r.scenario.name(),
                r.feature.name(),
                r.k.map_or_else(|| "NA".to_string(), |k| k.to_string()),
                r.mixtures,
                r.n_target,
                r.n_interferer,
                fmt_opt(r.mean_on_target),
                fmt_opt(r.mean_on_interferer),
                fmt_opt(r.auc),
                fmt_opt(r.lps_correlation),
            );
        }
        out
    }

    /// Per-room decay and kernel concentration, one line per (room, k).
    pub fn rooms_csv(&self) -> String {
        let mut out = String::from(ROOMS_HEADER);
        out.push('\n');
        for d in &self.rooms {
            for (k, conc) in &d.concentration {
                let mean = conc.iter().sum::<f64>() / conc.len().max(1) as f64;
                let min = conc.iter().copied().fold(f64::INFINITY, f64::min);
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{:.6e},{:.6e}",
                    d.band,
                    d.room,
                    d.dims[0],
                    d.dims[1],
                    d.dims[2],
                    d.target_rt60,
                    fmt_opt(d.measured_rt60),
                    k,
                    mean,
                    min
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep the mask, target LPS and feature maps of each room's first mixture.
    pub keep_raw: bool,
}

struct JobOutput {
    metrics: Vec<(RowKey, MetricsRow)>,
    diagnostics: Option<RoomDiagnostics>,
    failures: Vec<Failure>,
    raw: Vec<RawArtifact>,
}

/// A sampled room with the true responses of both talkers.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSetup {
    pub scene: Scene,
    pub target_rir: Rir,
    pub interferer_rir: Rir,
    /// Seed of the accepted draw; scenario and mixture seeds derive from it.
    pub seed: u64,
}

/// Seed slot of room `room` in band `band_index`.
pub fn room_slot_seed(master: u64, band_index: usize, room: usize) -> u64 {
    seed::derive(master, &[band_index as u64, room as u64])
}

/// Draws scenes from `slot_seed` until both talkers' responses simulate.
pub fn simulate_room(config: &ExperimentConfig, band: &Band, slot_seed: u64) -> Result<RoomSetup> {
    let mut last = String::from("no placement fits");
    for attempt in 0..ROOM_ATTEMPTS {
        let seed = seed::derive(slot_seed, &[attempt as u64]);
        let Some(scene) = sample_scene(config, band, seed) else {
            continue;
        };
        let (target_rir, interferer_rir) = match scene_rirs(config, &scene) {
            Ok(pair) => pair,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        return Ok(RoomSetup {
            scene,
            target_rir,
            interferer_rir,
            seed,
        });
    }
    Err(Error::Infeasible(format!(
        "no usable room after {ROOM_ATTEMPTS} draws: {last}"
    )))
}

/// True responses of the target and the interferer.
pub fn scene_rirs(config: &ExperimentConfig, scene: &Scene) -> Result<(Rir, Rir)> {
    let array = scene.array();
    let sim = |p: Point| simulate_rir(&scene.room, &p, &array, config.absorption, config.frame.sample_rate);
    Ok((sim(scene.target_position())?, sim(scene.interferer_position())?))
}

/// The target response an estimator would use under `kind`. The perturbation
/// seed depends only on the room seed and the scenario.
pub fn scenario_rir(
    config: &ExperimentConfig,
    scene: &Scene,
    true_rir: &Rir,
    room_seed: u64,
    kind: ScenarioKind,
) -> Result<Rir> {
    if kind == ScenarioKind::Ideal {
        return Ok(true_rir.clone());
    }
    let spec = ScenarioSpec::protocol(kind, seed::derive(room_seed, &[2, kind as u64]));
    let believed = perturb_scenario(scene, &spec)?;
    simulate_rir(
        &believed.room,
        &believed.target_position(),
        &believed.array(),
        config.absorption,
        config.frame.sample_rate,
    )
}

/// CTF of `rir`, zero-padded so it spans the largest configured k.
pub fn padded_ctf(config: &ExperimentConfig, rir: &Rir) -> Result<CtfFilter> {
    ctf_from_rir(&pad_for_frames(rir, &config.frame, config.max_k())?, &config.frame)
}

/// Seed of mixture `index` in the room drawn with `room_seed`.
pub fn mixture_seed(room_seed: u64, index: usize) -> u64 {
    seed::derive(room_seed, &[3, index as u64])
}

/// Two synthetic utterances mixed through the given responses with SIR and
/// overlap drawn from the configured ranges.
pub fn draw_mixture(config: &ExperimentConfig, rirs: (&Rir, &Rir), mixture_seed: u64) -> Result<MixtureBundle> {
    let fs = config.frame.sample_rate;
    let dry_t = synthetic_utterance(config.utterance_seconds, fs, seed::derive(mixture_seed, &[0]));
    let dry_i = synthetic_utterance(config.utterance_seconds, fs, seed::derive(mixture_seed, &[1]));
    let mut rng = seed::rng(seed::derive(mixture_seed, &[2]));
    let spec = MixSpec {
        sir_db: rng.random_range(config.sir_db.0..=config.sir_db.1),
        overlap_ratio: rng.random_range(config.overlap.0..=config.overlap.1),
        noise_snr_db: config.noise_snr_db,
        seed: seed::derive(mixture_seed, &[3]),
    };
    make_mixture(&dry_t, &dry_i, rirs, &spec)
}

fn run_job(config: &ExperimentConfig, band_index: usize, room: usize, options: RunOptions) -> JobOutput {
    let band = &config.bands[band_index];
    let mut out = JobOutput {
        metrics: Vec::new(),
        diagnostics: None,
        failures: Vec::new(),
        raw: Vec::new(),
    };
    let fail = |mixture: Option<usize>, message: String| Failure {
        band: band.name.clone(),
        room,
        mixture,
        message,
    };
    let setup = match simulate_room(config, band, room_slot_seed(config.seed, band_index, room)) {
        Ok(s) => s,
        Err(e) => {
            out.failures.push(fail(None, e.to_string()));
            return out;
        }
    };

    let mut ctfs = Vec::new();
    for &kind in &config.scenarios {
        match scenario_rir(config, &setup.scene, &setup.target_rir, setup.seed, kind)
            .and_then(|r| padded_ctf(config, &r))
        {
            Ok(c) => ctfs.push((kind, c)),
            Err(e) => out.failures.push(fail(None, format!("{} response: {e}", kind.name()))),
        }
    }

    let mut concentration = Vec::new();
    match padded_ctf(config, &setup.target_rir) {
        Ok(true_ctf) => {
            let mut ks = vec![1];
            ks.extend(config.ks.iter().copied().filter(|&k| k != 1));
            for k in ks {
                match kernel_concentration(&true_ctf, k) {
                    Ok(c) => concentration.push((k, c)),
                    Err(e) => out.failures.push(fail(None, format!("concentration k={k}: {e}"))),
                }
            }
        }
        Err(e) => out.failures.push(fail(None, format!("true CTF: {e}"))),
    }
    out.diagnostics = Some(RoomDiagnostics {
        band: band.name.clone(),
        room,
        dims: setup.scene.room.dims,
        target_rt60: setup.scene.room.rt60,
        measured_rt60: measure_rt60(&setup.target_rir).ok(),
        concentration,
    });

    for u in 0..config.mixtures_per_room {
        if let Err(e) = run_mixture(config, &setup, &ctfs, band_index, room, u, options, &mut out) {
            out.failures.push(fail(Some(u), e.to_string()));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn run_mixture(
    config: &ExperimentConfig,
    setup: &RoomSetup,
    ctfs: &[(ScenarioKind, CtfFilter)],
    band_index: usize,
    room: usize,
    mixture: usize,
    options: RunOptions,
    out: &mut JobOutput,
) -> Result<()> {
    let bundle = draw_mixture(
        config,
        (&setup.target_rir, &setup.interferer_rir),
        mixture_seed(setup.seed, mixture),
    )?;
    let mix = stft(&bundle.mixture, &config.frame)?;
    let target = stft(&bundle.target, &config.frame)?;
    let interferer = stft(&bundle.interferer, &config.frame)?;
    let mask = dominance_mask(&target, &interferer, config.margin_db, REFERENCE_CHANNEL)?;
    let lps = log_power_spectrum(&target, REFERENCE_CHANNEL);
    let keep = options.keep_raw && mixture == 0;
    let band = &config.bands[band_index];
    let mut raw = |scenario: Option<ScenarioKind>, name: String, values: Array2<f64>| {
        if keep {
            out.raw.push(RawArtifact {
                band: band.name.clone(),
                room,
                mixture,
                scenario,
                name,
                values,
            });
        }
    };
    raw(None, "mask".into(), mask.labels.mapv(|l| l.code() as f64));
    raw(None, "target_lps".into(), lps.clone());

    let mut metrics = Vec::new();
    let mut maps = Vec::new();
    for (kind, ctf) in ctfs {
        let sf = compute_sf(&mix, ctf, &config.pairs)?.per_pair();
        metrics.push((
            RowKey {
                band: band_index,
                scenario: *kind,
                feature: FeatureKind::Sf,
                k: None,
            },
            feature_metrics(sf.view(), &mask, lps.view())?,
        ));
        maps.push((*kind, "sf".to_string(), sf));
        for &k in &config.ks {
            let rsf = compute_rsf(&mix, ctf, &config.pairs, k)?.per_pair();
            metrics.push((
                RowKey {
                    band: band_index,
                    scenario: *kind,
                    feature: FeatureKind::Rsf,
                    k: Some(k),
                },
                feature_metrics(rsf.view(), &mask, lps.view())?,
            ));
            maps.push((*kind, format!("rsf_k{k}"), rsf));
        }
    }
    for (kind, name, values) in maps {
        raw(Some(kind), name, values);
    }
    out.metrics.extend(metrics);
    Ok(())
}

/// Runs every (band, room) job in parallel and reduces in job order, so the
/// report depends only on the configuration.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.bands.len())
        .flat_map(|b| (0..config.rooms).map(move |r| (b, r)))
        .collect();
    let outputs: Vec<JobOutput> = jobs
        .into_par_iter()
        .map(|(b, r)| run_job(config, b, r, options))
        .collect();

    let mut acc: BTreeMap<RowKey, Accumulator> = BTreeMap::new();
    let mut report = ExperimentReport::default();
    for job in outputs {
        for (key, m) in &job.metrics {
            acc.entry(*key).or_default().push(m);
        }
        report.rooms.extend(job.diagnostics);
        report.failures.extend(job.failures);
        report.raw.extend(job.raw);
    }
    report.rows = acc
        .into_iter()
        .map(|(key, a)| ReportRow {
            band: config.bands[key.band].name.clone(),
            scenario: key.scenario,
            feature: key.feature,
            k: key.k,
            mixtures: a.mixtures,
            n_target: a.n_target,
            n_interferer: a.n_interferer,
            mean_on_target: a.mean(0),
            mean_on_interferer: a.mean(1),
            auc: a.mean(2),
            lps_correlation: a.mean(3),
        })
        .collect();
    Ok(report)
}

/// Per-channel concentration ratio `c(k) / c(1)` of a diagnostics record.
pub fn concentration_gain(d: &RoomDiagnostics, k: usize) -> Option<Vec<f64>> {
    let base = d.concentration_at(1)?;
    let at = d.concentration_at(k)?;
    Some(at.iter().zip(base).map(|(a, b)| a / b).collect())
}
