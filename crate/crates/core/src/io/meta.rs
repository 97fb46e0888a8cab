//! Scene and mixture provenance as `key=value` records.

use std::path::Path;

use super::kv::{format_list, KvList};
use crate::error::{Error, Result};
use crate::eval::Scene;
use crate::mixer::MixMeta;
use crate::room::RoomSpec;

pub fn put_scene(kv: &mut KvList, scene: &Scene) {
    kv.push("room_dims", format_list(&scene.room.dims));
    kv.push("rt60", scene.room.rt60);
    kv.push("speed_of_sound", scene.room.speed_of_sound);
    if let Some(order) = scene.room.max_order {
        kv.push("max_order", order);
    }
    kv.push("array_center", format_list(&scene.array_center));
    let flat: Vec<f64> = scene.mic_offsets.iter().flatten().copied().collect();
    kv.push("mic_offsets", format_list(&flat));
    kv.push("target_offset", format_list(&scene.target_offset));
    kv.push("interferer_offset", format_list(&scene.interferer_offset));
}

pub fn get_scene(kv: &KvList, path: &Path) -> Result<Scene> {
    let flat = kv.require_list("mic_offsets", path)?;
    if flat.is_empty() || flat.len() % 3 != 0 {
        return Err(Error::format(
            path,
            format!("key 'mic_offsets': {} values is not a list of points", flat.len()),
        ));
    }
    let max_order = match kv.get("max_order") {
        Some(_) => Some(kv.require::<u32>("max_order", path)?),
        None => None,
    };
    Ok(Scene {
        room: RoomSpec {
            dims: kv.require_point("room_dims", path)?,
            rt60: kv.require("rt60", path)?,
            speed_of_sound: kv.require("speed_of_sound", path)?,
            max_order,
        },
        array_center: kv.require_point("array_center", path)?,
        mic_offsets: flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
        target_offset: kv.require_point("target_offset", path)?,
        interferer_offset: kv.require_point("interferer_offset", path)?,
    })
}

pub fn put_mix_meta(kv: &mut KvList, meta: &MixMeta) {
    kv.push("sir_db", meta.sir_db);
    kv.push("overlap_ratio", meta.overlap_ratio);
    kv.push("mix_seed", meta.seed);
    kv.push("target_onset", meta.target_onset);
    kv.push("interferer_onset", meta.interferer_onset);
    kv.push("interferer_gain", meta.interferer_gain);
    kv.push("overlap_start", meta.overlap.start);
    kv.push("overlap_end", meta.overlap.end);
    kv.push(
        "noise_snr_db",
        meta.noise_snr_db.map_or_else(|| "off".to_string(), |v| v.to_string()),
    );
    if let Some(s) = meta.noise_seed {
        kv.push("noise_seed", s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_round_trip_is_exact() {
        let scene = Scene {
            room: RoomSpec {
                max_order: Some(3),
                ..RoomSpec::new([5.1, 4.3, 2.9], 0.613)
            },
            array_center: [2.1, 1.7, 1.3],
            mic_offsets: vec![[-0.4, 0.0, 0.0], [0.1 + 0.2, 0.0, 0.0]],
            target_offset: [1.0 / 3.0, -0.7, 0.1],
            interferer_offset: [-1.1, 0.9, -0.2],
        };
        let mut kv = KvList::default();
        put_scene(&mut kv, &scene);
        let text = kv.encode().unwrap();
        let back = get_scene(&KvList::parse(&text).unwrap(), Path::new("m")).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn missing_fields_are_named() {
        let err = get_scene(&KvList::parse("mic_offsets=0,0,0\n").unwrap(), Path::new("meta.txt"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("room_dims"), "{err}");
    }
}
