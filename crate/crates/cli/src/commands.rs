use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{s, Array3, Ix2};
use rirsf_core::dsp::stft;
use rirsf_core::eval::{
    draw_mixture, mixture_seed, padded_ctf, room_slot_seed, run_experiment, scenario_rir, simulate_room, Band,
    ExperimentConfig, RunOptions, ScenarioKind, Scene,
};
use rirsf_core::features::{compute_rp, compute_rsf, compute_sf, FeatureKind};
use rirsf_core::io::{
    get_scene, put_mix_meta, put_scene, read_tensor, read_wav, render_config, write_pgm, write_tensor, write_wav,
    KvList, SampleFormat, Tensor,
};
use rirsf_core::par::*;
use rirsf_core::room::{measure_rt60, Rir};
use rirsf_core::Error;

use crate::Context;

type Result<T> = std::result::Result<T, Error>;

fn data_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Files with extension `ext` directly inside `dir`, sorted by name.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for e in entries {
        let path = e
            .map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|x| x == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Target and interferer responses stored as `[2 × M × L]`, each padded to
/// the longer of the two; the true lengths are kept in the metadata.
fn room_tensor(config: &ExperimentConfig, band: &Band, band_index: usize, room: usize) -> Result<Tensor> {
    let setup = simulate_room(config, band, room_slot_seed(config.seed, band_index, room))?;
    let (t, i) = (&setup.target_rir, &setup.interferer_rir);
    let len = t.len().max(i.len());
    let mut taps = Array3::zeros((2, t.channels(), len));
    taps.slice_mut(s![0, .., ..t.len()]).assign(&t.taps);
    taps.slice_mut(s![1, .., ..i.len()]).assign(&i.taps);
    let mut tensor = Tensor::real(taps.view())
        .with_meta("kind", "rir")
        .with_meta("band", &band.name)
        .with_meta("band_index", band_index)
        .with_meta("room", room)
        .with_meta("master_seed", config.seed)
        .with_meta("room_seed", setup.seed)
        .with_meta("sample_rate", config.frame.sample_rate)
        .with_meta("absorption", config.absorption.name())
        .with_meta("target_len", t.len())
        .with_meta("interferer_len", i.len());
    put_scene(&mut tensor.meta, &setup.scene);
    Ok(tensor)
}

struct StoredRoom {
    meta: KvList,
    scene: Scene,
    target: Rir,
    interferer: Rir,
    room_seed: u64,
}

fn load_room(path: &Path) -> Result<StoredRoom> {
    let tensor = read_tensor(path)?;
    let meta = tensor.meta.clone();
    let taps = tensor
        .to_real()
        .and_then(|a| a.into_dimensionality::<ndarray::Ix3>().ok())
        .filter(|a| a.shape()[0] == 2)
        .ok_or_else(|| data_error(path, "expected a real [2 × channels × taps] response tensor"))?;
    let fs: u32 = meta.require("sample_rate", path)?;
    let cut = |src: usize, key: &str| -> Result<Rir> {
        let n: usize = meta.require(key, path)?;
        if n == 0 || n > taps.shape()[2] {
            return Err(data_error(
                path,
                format!("{key} {n} exceeds the stored {} taps", taps.shape()[2]),
            ));
        }
        Rir::new(taps.slice(s![src, .., ..n]).to_owned(), fs)
    };
    Ok(StoredRoom {
        scene: get_scene(&meta, path)?,
        target: cut(0, "target_len")?,
        interferer: cut(1, "interferer_len")?,
        room_seed: meta.require("room_seed", path)?,
        meta,
    })
}

pub fn simulate(ctx: &Context, rt60: Option<f64>, rooms: Option<usize>) -> Result<()> {
    let mut config = ctx.config.clone();
    if let Some(t) = rt60 {
        config.bands = vec![Band::new("fixed", t, t)];
    }
    if let Some(r) = rooms {
        config.rooms = r;
    }
    config.validate()?;
    let dir = ctx.out.join("rirs");
    mkdir(&dir)?;
    let jobs: Vec<(usize, usize)> = (0..config.bands.len())
        .flat_map(|b| (0..config.rooms).map(move |r| (b, r)))
        .collect();
    let written: Vec<Result<PathBuf>> = jobs
        .into_par_iter()
        .map(|(b, r)| {
            let band = &config.bands[b];
            let path = dir.join(format!("{}_room{r:03}.rsft", band.name));
            write_tensor(&path, &room_tensor(&config, band, b, r)?)?;
            Ok(path)
        })
        .collect();
    for path in written {
        println!("{}", path?.display());
    }
    Ok(())
}

pub fn mix(ctx: &Context, mixtures: Option<usize>, format: SampleFormat) -> Result<()> {
    let config = &ctx.config;
    let per_room = mixtures.unwrap_or(config.mixtures_per_room);
    if per_room == 0 {
        return Err(Error::Config("--mixtures must be positive".into()));
    }
    let rir_dir = ctx.out.join("rirs");
    let rooms = if rir_dir.is_dir() {
        list_files(&rir_dir, "rsft")?
    } else {
        Vec::new()
    };
    if rooms.is_empty() {
        return Err(data_error(&rir_dir, "no response tensors; run `rirsf simulate` first"));
    }
    let jobs: Vec<(PathBuf, usize)> = rooms
        .iter()
        .flat_map(|p| (0..per_room).map(move |u| (p.clone(), u)))
        .collect();
    let written: Vec<Result<PathBuf>> = jobs
        .into_par_iter()
        .map(|(path, u)| {
            let room = load_room(&path)?;
            if room.target.sample_rate != config.frame.sample_rate {
                return Err(data_error(
                    &path,
                    format!(
                        "sample rate {} differs from the configured {}",
                        room.target.sample_rate, config.frame.sample_rate
                    ),
                ));
            }
            let seed = mixture_seed(room.room_seed, u);
            let bundle = draw_mixture(config, (&room.target, &room.interferer), seed)?;
            let dir = ctx.out.join("bundles").join(format!("{}_mix{u:02}", stem(&path)));
            mkdir(&dir)?;
            write_wav(&dir.join("mixture.wav"), &bundle.mixture, format)?;
            write_wav(&dir.join("target.wav"), &bundle.target, format)?;
            write_wav(&dir.join("interferer.wav"), &bundle.interferer, format)?;
            if let Some(noise) = &bundle.noise {
                write_wav(&dir.join("noise.wav"), noise, format)?;
            }
            std::fs::copy(&path, dir.join("rir.rsft")).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let mut meta = room.meta.clone();
            meta.push("kind", "bundle");
            meta.push("rir_source", stem(&path));
            meta.push("mixture", u);
            meta.push("mixture_seed", seed);
            put_mix_meta(&mut meta, &bundle.meta);
            meta.write(&dir.join("meta.txt"))?;
            Ok(dir)
        })
        .collect();
    for dir in written {
        println!("{}", dir?.display());
    }
    Ok(())
}

pub fn features(
    ctx: &Context,
    bundle: &Path,
    feature: &str,
    k: Option<usize>,
    scenario: &str,
    channel: usize,
) -> Result<()> {
    let kind = FeatureKind::parse(feature)?;
    let scenario = ScenarioKind::parse(scenario)?;
    let k = match (kind, k) {
        (FeatureKind::Sf, Some(_)) => return Err(Error::Config("--k applies to rsf and rp, not sf".into())),
        (FeatureKind::Sf, None) => None,
        (FeatureKind::Rsf | FeatureKind::Rp, Some(0)) => return Err(Error::Config("--k must be at least 1".into())),
        (FeatureKind::Rsf | FeatureKind::Rp, k) => Some(k.unwrap_or(ctx.config.max_k())),
        (other, _) => {
            return Err(Error::Config(format!(
                "feature '{}' is not extracted from bundles; use sf, rsf or rp",
                other.name()
            )))
        }
    };
    let meta_path = bundle.join("meta.txt");
    let meta = KvList::read(&meta_path)?;
    let room = load_room(&bundle.join("rir.rsft"))?;
    let mixture = read_wav(&bundle.join("mixture.wav"))?;
    let mut config = ctx.config.clone();
    if mixture.sample_rate() != config.frame.sample_rate {
        return Err(data_error(
            &bundle.join("mixture.wav"),
            format!(
                "sample rate {} differs from the configured {}",
                mixture.sample_rate(),
                config.frame.sample_rate
            ),
        ));
    }
    config.ks = vec![k.unwrap_or(1)];
    let rir = scenario_rir(&config, &room.scene, &room.target, room.room_seed, scenario)?;
    let ctf = padded_ctf(&config, &rir)?;
    let spec = stft(&mixture, &config.frame)?;
    let map = match kind {
        FeatureKind::Sf => compute_sf(&spec, &ctf, &config.pairs)?,
        FeatureKind::Rsf => compute_rsf(&spec, &ctf, &config.pairs, k.unwrap_or(1))?,
        _ => compute_rp(&spec, &ctf, channel, k.unwrap_or(1))?,
    };
    let name = match (kind, k) {
        (FeatureKind::Rp, Some(k)) => format!("rp{channel}_k{k}_{}", scenario.name()),
        (_, Some(k)) => format!("{}_k{k}_{}", kind.name(), scenario.name()),
        (_, None) => format!("{}_{}", kind.name(), scenario.name()),
    };
    let bundle_name = bundle
        .file_name()
        .map_or_else(|| "bundle".to_string(), |n| n.to_string_lossy().into_owned());
    let dir = ctx.out.join("features").join(&bundle_name);
    mkdir(&dir)?;
    let mut tensor = Tensor::real(map.values.view())
        .with_meta("kind", "feature")
        .with_meta("feature", kind.name())
        .with_meta("scenario", scenario.name())
        .with_meta("bundle", &bundle_name)
        .with_meta("mixture_seed", meta.get("mixture_seed").unwrap_or("NA"))
        .with_meta("layout", "frames,bins")
        .with_meta("hop", config.frame.hop)
        .with_meta("sample_rate", config.frame.sample_rate);
    if let Some(k) = k {
        tensor = tensor.with_meta("k", k);
    }
    match &map.pairs {
        Some(p) => tensor = tensor.with_meta("pairs", p.to_spec_string()),
        None => tensor = tensor.with_meta("channel", channel),
    }
    let path = dir.join(format!("{name}.rsft"));
    write_tensor(&path, &tensor)?;
    println!("{}", path.display());
    Ok(())
}

pub fn eval(ctx: &Context, raw: bool) -> Result<()> {
    let report = run_experiment(&ctx.config, RunOptions { keep_raw: raw })?;
    for f in &report.failures {
        let mixture = f.mixture.map_or_else(String::new, |m| format!(" mixture {m}"));
        eprintln!("warning: {} room {}{mixture}: {}", f.band, f.room, f.message);
    }
    if report.rows.is_empty() {
        return Err(data_error(&ctx.out, "no mixture could be evaluated"));
    }
    mkdir(&ctx.out)?;
    write_text(&ctx.out.join("report.csv"), &report.to_csv())?;
    write_text(&ctx.out.join("rooms.csv"), &report.rooms_csv())?;
    write_text(&ctx.out.join("config.cfg"), &render_config(&ctx.config, None))?;
    if raw {
        let dir = ctx.out.join("raw");
        mkdir(&dir)?;
        for a in &report.raw {
            let scenario = a.scenario.map_or("ref", ScenarioKind::name);
            let path = dir.join(format!(
                "{}_room{:03}_mix{:02}_{scenario}_{}.rsft",
                a.band, a.room, a.mixture, a.name
            ));
            let tensor = Tensor::real(a.values.view())
                .with_meta("kind", "raw")
                .with_meta("name", &a.name)
                .with_meta("band", &a.band)
                .with_meta("room", a.room)
                .with_meta("scenario", scenario)
                .with_meta("layout", "frames,bins");
            write_tensor(&path, &tensor)?;
        }
    }
    println!(
        "{}: {} rows, {} rooms, {} failures",
        ctx.out.join("report.csv").display(),
        report.rows.len(),
        report.rooms.len(),
        report.failures.len()
    );
    Ok(())
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| data_error(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| data_error(path, e.to_string()))?.clone();
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| data_error(path, e.to_string()))?;
            Ok(headers
                .iter()
                .map(str::to_string)
                .zip(r.iter().map(str::to_string))
                .collect())
        })
        .collect()
}

fn field<'a>(row: &'a BTreeMap<String, String>, key: &str, path: &Path) -> Result<&'a str> {
    row.get(key)
        .map(String::as_str)
        .ok_or_else(|| data_error(path, format!("missing column '{key}'")))
}

fn number(row: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<Option<f64>> {
    let raw = field(row, key, path)?;
    if raw == "NA" {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| data_error(path, format!("column '{key}': '{raw}' is not a number")))
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.3}"))
}

fn summarise_report(path: &Path) -> Result<()> {
    let rows = read_csv(path)?;
    println!("metrics ({})", path.display());
    println!(
        "  {:<8} {:<6} {:<8} {:>4} {:>4} {:>8} {:>8} {:>8} {:>8}",
        "band", "scen", "feature", "k", "mix", "auc", "on_tgt", "on_intf", "lps_r"
    );
    let mut sf: BTreeMap<(String, String), (Option<f64>, Option<f64>)> = BTreeMap::new();
    let mut rsf: Vec<(String, String, String, Option<f64>, Option<f64>)> = Vec::new();
    for row in &rows {
        let band = field(row, "band", path)?.to_string();
        let scen = field(row, "scenario", path)?.to_string();
        let feature = field(row, "feature", path)?;
        let k = field(row, "k", path)?;
        let auc = number(row, "auc", path)?;
        let on_target = number(row, "mean_on_target", path)?;
        println!(
            "  {:<8} {:<6} {:<8} {:>4} {:>4} {:>8} {:>8} {:>8} {:>8}",
            band,
            scen,
            feature,
            k,
            field(row, "mixtures", path)?,
            show(auc),
            show(on_target),
            show(number(row, "mean_on_interferer", path)?),
            show(number(row, "lps_correlation", path)?),
        );
        match feature {
            "sf" => {
                sf.insert((band, scen), (auc, on_target));
            }
            "rsf" => rsf.push((band, scen, k.to_string(), auc, on_target)),
            _ => {}
        }
    }
    println!("rsf against sf (target-dominated mean gain, auc gain)");
    for (band, scen, k, auc, on_target) in rsf {
        if let Some((sf_auc, sf_on)) = sf.get(&(band.clone(), scen.clone())) {
            let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
            println!(
                "  {band}/{scen} k={k}: {:+} on target, {:+} auc",
                show(diff(on_target, *sf_on)),
                show(diff(auc, *sf_auc))
            );
        }
    }
    Ok(())
}

fn summarise_rooms(path: &Path) -> Result<()> {
    let rows = read_csv(path)?;
    let mut seen = BTreeMap::new();
    for row in &rows {
        let key = (
            field(row, "band", path)?.to_string(),
            field(row, "room", path)?.to_string(),
        );
        let target = number(row, "target_rt60", path)?;
        let measured = number(row, "measured_rt60", path)?;
        seen.insert(key, (target, measured));
    }
    let errors: Vec<f64> = seen
        .values()
        .filter_map(|(t, m)| t.zip(*m).map(|(t, m)| m / t - 1.0))
        .collect();
    let worst = errors.iter().fold(0.0f64, |w, e| w.max(e.abs()));
    let mean = errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len().max(1) as f64;
    println!(
        "rooms ({}): {} rooms, {} with a measurable decay, mean |error| {:.1}%, worst {:.1}%",
        path.display(),
        seen.len(),
        errors.len(),
        100.0 * mean,
        100.0 * worst
    );
    Ok(())
}

fn summarise_rirs(dir: &Path) -> Result<usize> {
    let files = list_files(dir, "rsft")?;
    if files.is_empty() {
        return Ok(0);
    }
    println!("responses ({})", dir.display());
    for path in &files {
        let room = load_room(path)?;
        let target = room.scene.room.rt60;
        match measure_rt60(&room.target) {
            Ok(m) => println!(
                "  {}: target rt60 {target:.3} s, measured {m:.3} s ({:+.1}%)",
                stem(path),
                100.0 * (m / target - 1.0)
            ),
            Err(e) => println!("  {}: target rt60 {target:.3} s, measured NA ({e})", stem(path)),
        }
    }
    Ok(files.len())
}

pub fn report(ctx: &Context, csv: Option<&Path>) -> Result<()> {
    let mut found = false;
    let default_report = ctx.out.join("report.csv");
    match csv {
        Some(path) => {
            summarise_report(path)?;
            found = true;
        }
        None if default_report.is_file() => {
            summarise_report(&default_report)?;
            found = true;
        }
        None => {}
    }
    let rooms = ctx.out.join("rooms.csv");
    if csv.is_none() && rooms.is_file() {
        summarise_rooms(&rooms)?;
        found = true;
    }
    let rirs = ctx.out.join("rirs");
    if csv.is_none() && rirs.is_dir() {
        found |= summarise_rirs(&rirs)? > 0;
    }
    if !found {
        return Err(data_error(
            &ctx.out,
            "nothing to report: no report.csv, rooms.csv or rirs/",
        ));
    }
    Ok(())
}

/// Every `.rsft` file under `dir`, depth first, sorted.
fn collect_tensors(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_tensors(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "rsft") {
            out.push(p);
        }
    }
    Ok(())
}

pub fn plot(ctx: &Context, tensors: &[PathBuf]) -> Result<()> {
    let inputs = if tensors.is_empty() {
        let mut found = Vec::new();
        collect_tensors(&ctx.out.join("features"), &mut found)?;
        collect_tensors(&ctx.out.join("raw"), &mut found)?;
        if found.is_empty() {
            return Err(data_error(&ctx.out, "no feature or raw tensors to plot"));
        }
        found
    } else {
        tensors.to_vec()
    };
    let dir = ctx.out.join("plots");
    mkdir(&dir)?;
    for path in &inputs {
        let tensor = read_tensor(path)?;
        let map = tensor
            .to_real()
            .and_then(|a| a.into_dimensionality::<Ix2>().ok())
            .ok_or_else(|| data_error(path, format!("expected a real 2-D map, got shape {:?}", tensor.shape())))?;
        // Keep names unique across bundles by folding the parent directory in.
        let name = match path.strip_prefix(&ctx.out) {
            Ok(rel) => rel
                .with_extension("")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("__"),
            Err(_) => stem(path),
        };
        let target = dir.join(format!("{name}.pgm"));
        write_pgm(&target, map.view())?;
        println!("{}", target.display());
    }
    Ok(())
}
