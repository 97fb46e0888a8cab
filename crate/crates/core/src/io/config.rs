//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [experiment]
//! seed = 7
//! rooms = 2
//! mixtures_per_room = 2
//! utterance_seconds = 1.0
//! scenarios = ideal,sce1,sce2
//! ks = 2,10
//! margin_db = 3
//!
//! [bands]
//! weak = 0.1,0.6
//! strong = 0.5,0.7
//!
//! [array]
//! offsets = 0,0.15,0.25,0.3,0.5,0.55,0.65,0.8
//! pairs = 0-7,1-6,2-5,3-4
//!
//! [mixture]
//! sir_db = -6,6
//! overlap = 0.5,1
//! noise_snr_db = off
//! speaker_distance = 0.5,12
//! min_separation_deg = 20
//!
//! [room]
//! min = 3,3,2.5
//! max = 8,6,4
//! speed_of_sound = 343
//! absorption = calibrated
//!
//! [stft]
//! sample_rate = 16000
//! win_len = 512
//! hop = 256
//! fft_size = 512
//! window = sqrt_hann
//!
//! [output]
//! dir = out
//! ```
//!
//! Every key is optional and falls back to [`ExperimentConfig::default`].
//! A `[bands]` section replaces the default bands entirely. Lines starting
//! with `#` or `;` are comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption};

use super::kv::{format_list, parse_list};
use crate::dsp::WindowKind;
use crate::error::{Error, Result};
use crate::eval::{Band, ExperimentConfig, ScenarioKind};
use crate::features::PairSet;
use crate::room::Absorption;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub experiment: ExperimentConfig,
    pub out_dir: Option<PathBuf>,
}

struct Entry {
    section: String,
    key: String,
    value: String,
}

/// Key entries in file order plus every section header seen.
fn entries(text: &str, origin: &str) -> Result<(Vec<Entry>, Vec<String>)> {
    let opts = ParseOption {
        enabled_quote: false,
        enabled_escape: false,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_str_opt(text, opts).map_err(|e| Error::config(format!("{origin}: {e}")))?;
    let mut out: Vec<Entry> = Vec::new();
    let mut headers = Vec::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((key, _)) = props.iter().next() {
                return Err(Error::config(format!("{origin}: key '{key}' outside any [section]")));
            }
            continue;
        };
        headers.push(section.to_string());
        for (key, value) in props.iter() {
            if out.iter().any(|e| e.section == section && e.key == key) {
                return Err(Error::config(format!("{origin}: [{section}] {key} set twice")));
            }
            out.push(Entry {
                section: section.to_string(),
                key: key.to_string(),
                value: value.trim().to_string(),
            });
        }
    }
    Ok((out, headers))
}

fn pair_of(v: &[f64]) -> std::result::Result<(f64, f64), String> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected 2 numbers, got {}", v.len())),
    }
}

fn triple_of(v: &[f64]) -> std::result::Result<[f64; 3], String> {
    match v {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(format!("expected 3 numbers, got {}", v.len())),
    }
}

fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("'{s}' is not a valid number"))
}

fn apply(
    cfg: &mut ExperimentConfig,
    out_dir: &mut Option<PathBuf>,
    bands: &mut Vec<Band>,
    e: &Entry,
) -> std::result::Result<(), String> {
    let v = e.value.as_str();
    match (e.section.as_str(), e.key.as_str()) {
        ("experiment", "seed") => cfg.seed = num(v)?,
        ("experiment", "rooms") => cfg.rooms = num(v)?,
        ("experiment", "mixtures_per_room") => cfg.mixtures_per_room = num(v)?,
        ("experiment", "utterance_seconds") => cfg.utterance_seconds = num(v)?,
        ("experiment", "margin_db") => cfg.margin_db = num(v)?,
        ("experiment", "scenarios") => {
            cfg.scenarios = v
                .split(',')
                .map(|s| ScenarioKind::parse(s.trim()).map_err(|e| e.to_string()))
                .collect::<std::result::Result<_, _>>()?
        }
        ("experiment", "ks") => {
            cfg.ks = v
                .split(',')
                .map(|s| num::<usize>(s.trim()))
                .collect::<std::result::Result<_, _>>()?
        }
        ("bands", name) => bands.push(Band {
            name: name.to_string(),
            rt60: pair_of(&parse_list(v)?)?,
        }),
        ("array", "offsets") => cfg.array_offsets = parse_list(v)?,
        ("array", "pairs") => cfg.pairs = PairSet::parse(v).map_err(|e| e.to_string())?,
        ("mixture", "sir_db") => cfg.sir_db = pair_of(&parse_list(v)?)?,
        ("mixture", "overlap") => cfg.overlap = pair_of(&parse_list(v)?)?,
        ("mixture", "noise_snr_db") => cfg.noise_snr_db = if v == "off" { None } else { Some(num(v)?) },
        ("mixture", "speaker_distance") => cfg.speaker_distance = pair_of(&parse_list(v)?)?,
        ("mixture", "min_separation_deg") => cfg.min_separation_deg = num(v)?,
        ("room", "min") => cfg.room_min = triple_of(&parse_list(v)?)?,
        ("room", "max") => cfg.room_max = triple_of(&parse_list(v)?)?,
        ("room", "speed_of_sound") => cfg.speed_of_sound = num(v)?,
        ("room", "absorption") => cfg.absorption = Absorption::parse(v).map_err(|e| e.to_string())?,
        ("stft", "sample_rate") => cfg.frame.sample_rate = num(v)?,
        ("stft", "win_len") => cfg.frame.win_len = num(v)?,
        ("stft", "hop") => cfg.frame.hop = num(v)?,
        ("stft", "fft_size") => cfg.frame.fft_size = num(v)?,
        ("stft", "window") => cfg.frame.window = WindowKind::parse(v).map_err(|e| e.to_string())?,
        ("output", "dir") => {
            if v.is_empty() {
                return Err("output dir is empty".into());
            }
            *out_dir = Some(PathBuf::from(v))
        }
        (s @ ("experiment" | "array" | "mixture" | "room" | "stft" | "output"), k) => {
            return Err(format!("unknown key '{k}' in [{s}]"))
        }
        (s, _) => return Err(format!("unknown section [{s}]")),
    }
    Ok(())
}

/// Parses and validates a configuration; `origin` names the source in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<LoadedConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut out_dir = None;
    let mut bands = Vec::new();
    let (entries, headers) = entries(text, origin)?;
    for e in &entries {
        apply(&mut cfg, &mut out_dir, &mut bands, e)
            .map_err(|msg| Error::config(format!("{origin}: [{}] {}: {msg}", e.section, e.key)))?;
    }
    if headers.iter().any(|h| h == "bands") {
        cfg.bands = bands;
    }
    cfg.validate().map_err(|e| match e {
        Error::Config(m) | Error::Range(m) => Error::config(format!("{origin}: {m}")),
        other => other,
    })?;
    Ok(LoadedConfig {
        experiment: cfg,
        out_dir,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Renders a configuration that [`parse_config`] reads back unchanged.
pub fn render_config(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> String {
    let mut s = String::new();
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let scenarios = cfg.scenarios.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
    // Writing to a String cannot fail.
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "rooms = {}", cfg.rooms);
    let _ = writeln!(s, "mixtures_per_room = {}", cfg.mixtures_per_room);
    let _ = writeln!(s, "utterance_seconds = {}", cfg.utterance_seconds);
    let _ = writeln!(s, "scenarios = {scenarios}");
    let _ = writeln!(s, "ks = {}", list(&cfg.ks));
    let _ = writeln!(s, "margin_db = {}", cfg.margin_db);
    let _ = writeln!(s, "\n[bands]");
    for b in &cfg.bands {
        let _ = writeln!(s, "{} = {}", b.name, format_list(&[b.rt60.0, b.rt60.1]));
    }
    let _ = writeln!(s, "\n[array]");
    let _ = writeln!(s, "offsets = {}", format_list(&cfg.array_offsets));
    let _ = writeln!(s, "pairs = {}", cfg.pairs.to_spec_string());
    let _ = writeln!(s, "\n[mixture]");
    let _ = writeln!(s, "sir_db = {}", format_list(&[cfg.sir_db.0, cfg.sir_db.1]));
    let _ = writeln!(s, "overlap = {}", format_list(&[cfg.overlap.0, cfg.overlap.1]));
    match cfg.noise_snr_db {
        Some(v) => writeln!(s, "noise_snr_db = {v}"),
        None => writeln!(s, "noise_snr_db = off"),
    }
    .ok();
    let _ = writeln!(
        s,
        "speaker_distance = {}",
        format_list(&[cfg.speaker_distance.0, cfg.speaker_distance.1])
    );
    let _ = writeln!(s, "min_separation_deg = {}", cfg.min_separation_deg);
    let _ = writeln!(s, "\n[room]");
    let _ = writeln!(s, "min = {}", format_list(&cfg.room_min));
    let _ = writeln!(s, "max = {}", format_list(&cfg.room_max));
    let _ = writeln!(s, "speed_of_sound = {}", cfg.speed_of_sound);
    let _ = writeln!(s, "absorption = {}", cfg.absorption.name());
    let _ = writeln!(s, "\n[stft]");
    let _ = writeln!(s, "sample_rate = {}", cfg.frame.sample_rate);
    let _ = writeln!(s, "win_len = {}", cfg.frame.win_len);
    let _ = writeln!(s, "hop = {}", cfg.frame.hop);
    let _ = writeln!(s, "fft_size = {}", cfg.frame.fft_size);
    let _ = writeln!(s, "window = {}", cfg.frame.window.name());
    if let Some(dir) = out_dir {
        let _ = writeln!(s, "\n[output]\ndir = {}", dir.display());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        parse_config(text, "t.cfg").unwrap_err().to_string()
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(
            parse_config("", "t.cfg").unwrap().experiment,
            ExperimentConfig::default()
        );
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::smoke(7);
        cfg.noise_snr_db = Some(20.0);
        cfg.ks = vec![1, 3, 10];
        cfg.scenarios = vec![ScenarioKind::Sce2];
        let text = render_config(&cfg, Some(Path::new("runs/a")));
        let back = parse_config(&text, "t.cfg").unwrap();
        assert_eq!(back.experiment, cfg);
        assert_eq!(back.out_dir, Some(PathBuf::from("runs/a")));
    }

    #[test]
    fn sections_and_comments() {
        let text =
            "# smoke\n[experiment]\nrooms = 3\n; note\n[bands]\nmid = 0.2, 0.4\n[stft]\nwindow = hann\nhop = 128\n";
        let cfg = parse_config(text, "t.cfg").unwrap().experiment;
        assert_eq!(cfg.rooms, 3);
        assert_eq!(cfg.bands, vec![Band::new("mid", 0.2, 0.4)]);
        assert_eq!(cfg.frame.window, WindowKind::Hann);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(err("[experiment]\nroom = 3\n").contains("unknown key 'room'"));
        assert!(err("[nope]\na = 1\n").contains("unknown section"));
        assert!(err("rooms = 3\n").contains("outside any [section]"));
        assert!(err("[experiment]\nrooms = 3\nrooms = 4\n").contains("set twice"));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(err("[experiment]\nrooms = 0\n").contains("rooms"));
        assert!(err("[bands]\nx = 0.7,0.5\n").contains("band x"));
        assert!(err("[mixture]\noverlap = 0.2,1\n").contains("overlap"));
        assert!(err("[array]\npairs = 0-9\n").contains("pair"));
        assert!(err("[stft]\nhop = 500\n").contains("hop"));
        assert!(err("[experiment]\nks = 0\n").contains("k values"));
        assert!(err("[experiment]\nseed = -1\n").contains("t.cfg: [experiment] seed"));
        assert!(err("[bands]\n").contains("band"));
    }
}
