use rand::Rng;

use crate::error::{Error, Result};
use crate::room::{ArrayGeometry, Point, RoomSpec};
use crate::seed;

/// Minimum distance kept between any placed point and the walls.
pub const WALL_CLEARANCE: f64 = 0.05;

/// A room with one array and two talkers. Talker positions are stored
/// relative to the array centre so that moving the array carries them along
/// without touching the relative vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: RoomSpec,
    pub array_center: Point,
    pub mic_offsets: Vec<Point>,
    pub target_offset: Point,
    pub interferer_offset: Point,
}

fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

impl Scene {
    pub fn mic_positions(&self) -> Vec<Point> {
        self.mic_offsets.iter().map(|o| add(&self.array_center, o)).collect()
    }

    pub fn array(&self) -> ArrayGeometry {
        ArrayGeometry::new(self.mic_positions()).expect("scene has microphones")
    }

    pub fn target_position(&self) -> Point {
        add(&self.array_center, &self.target_offset)
    }

    pub fn interferer_position(&self) -> Point {
        add(&self.array_center, &self.interferer_offset)
    }

    /// Every offset relative to the array centre (microphones, then talkers).
    fn offsets(&self) -> impl Iterator<Item = &Point> {
        self.mic_offsets
            .iter()
            .chain([&self.target_offset, &self.interferer_offset])
    }

    /// Range of array-centre coordinates along `d` that keeps every point at
    /// least `clearance` from the walls of a room of size `len`.
    fn center_bounds(&self, d: usize, len: f64, clearance: f64) -> (f64, f64) {
        let lo = self
            .offsets()
            .map(|o| clearance - o[d])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = self
            .offsets()
            .map(|o| len - clearance - o[d])
            .fold(f64::INFINITY, f64::min);
        (lo, hi)
    }

    pub fn is_inside(&self, clearance: f64) -> bool {
        (0..3).all(|d| {
            let (lo, hi) = self.center_bounds(d, self.room.dims[d], clearance);
            self.array_center[d] >= lo && self.array_center[d] <= hi
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    /// Every parameter of the target response is known exactly.
    Ideal,
    /// Geometry exact, decay time unknown.
    Sce1,
    /// Decay time, room size and absolute placement unknown; only the
    /// talker-to-array vector is exact.
    Sce2,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Ideal, ScenarioKind::Sce1, ScenarioKind::Sce2];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Ideal => "ideal",
            ScenarioKind::Sce1 => "sce1",
            ScenarioKind::Sce2 => "sce2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(ScenarioKind::Ideal),
            "sce1" => Ok(ScenarioKind::Sce1),
            "sce2" => Ok(ScenarioKind::Sce2),
            other => Err(Error::config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub rt60_range: (f64, f64),
    pub shift_bound: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Decay time redrawn from 0.3–0.8 s; geometry shifts up to 0.5 m.
    pub fn protocol(kind: ScenarioKind, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            rt60_range: (0.3, 0.8),
            shift_bound: 0.5,
            seed,
        }
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 64;

/// The scene a response estimator would believe in under the given scenario.
pub fn perturb_scenario(truth: &Scene, spec: &ScenarioSpec) -> Result<Scene> {
    if !truth.is_inside(0.0) {
        return Err(Error::config("true scene places points outside the room"));
    }
    let mut rng = seed::rng(spec.seed);
    let draw_rt60 = |rng: &mut seed::Rng| rng.random_range(spec.rt60_range.0..=spec.rt60_range.1);
    match spec.kind {
        ScenarioKind::Ideal => Ok(truth.clone()),
        ScenarioKind::Sce1 => {
            let mut out = truth.clone();
            out.room.rt60 = draw_rt60(&mut rng);
            Ok(out)
        }
        ScenarioKind::Sce2 => {
            let rt60 = draw_rt60(&mut rng);
            let b = spec.shift_bound;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let mut out = truth.clone();
                out.room.rt60 = rt60;
                for d in 0..3 {
                    out.room.dims[d] = truth.room.dims[d] + rng.random_range(-b..=b);
                }
                let shift: Vec<f64> = (0..3).map(|_| rng.random_range(-b..=b)).collect();
                let mut feasible = true;
                for d in 0..3 {
                    let (lo, hi) = out.center_bounds(d, out.room.dims[d], WALL_CLEARANCE);
                    if lo > hi {
                        feasible = false;
                        break;
                    }
                    // Clipping towards the truth never moves further than the draw did.
                    out.array_center[d] = (truth.array_center[d] + shift[d]).clamp(lo, hi);
                }
                if feasible {
                    return Ok(out);
                }
            }
            Err(Error::Infeasible(format!(
                "no perturbed room of {:?} ± {b} m fits the array and talkers",
                truth.room.dims
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::PROTOCOL_ARRAY_OFFSETS;

    fn scene() -> Scene {
        let arr = ArrayGeometry::linear([0.0; 3], &PROTOCOL_ARRAY_OFFSETS).unwrap();
        Scene {
            room: RoomSpec::new([5.0, 4.0, 3.0], 0.6),
            array_center: [2.5, 1.5, 1.3],
            mic_offsets: arr.mic_positions,
            target_offset: [0.3, 1.2, 0.4],
            interferer_offset: [-1.1, 0.9, 0.2],
        }
    }

    #[test]
    fn ideal_is_identity() {
        let s = scene();
        assert_eq!(
            perturb_scenario(&s, &ScenarioSpec::protocol(ScenarioKind::Ideal, 3)).unwrap(),
            s
        );
    }

    #[test]
    fn sce1_changes_only_rt60() {
        let s = scene();
        for seed in 0..50 {
            let p = perturb_scenario(&s, &ScenarioSpec::protocol(ScenarioKind::Sce1, seed)).unwrap();
            assert!((0.3..=0.8).contains(&p.room.rt60));
            let mut back = p.clone();
            back.room.rt60 = s.room.rt60;
            assert_eq!(back, s);
        }
    }

    #[test]
    fn sce2_preserves_relative_vectors_bit_exactly() {
        let s = scene();
        for seed in 0..200 {
            let p = perturb_scenario(&s, &ScenarioSpec::protocol(ScenarioKind::Sce2, seed)).unwrap();
            assert_eq!(p.target_offset, s.target_offset);
            assert_eq!(p.mic_offsets, s.mic_offsets);
            assert!((0.3..=0.8).contains(&p.room.rt60));
            for d in 0..3 {
                assert!((p.room.dims[d] - s.room.dims[d]).abs() <= 0.5);
                assert!((p.target_position()[d] - s.target_position()[d]).abs() <= 0.5 + 1e-12);
                assert!((p.array_center[d] - s.array_center[d]).abs() <= 0.5);
            }
            assert!(p.is_inside(WALL_CLEARANCE - 1e-12));
        }
    }

    #[test]
    fn impossible_fit_is_reported() {
        // A 2 m array in a 2.02 m room cannot keep 5 cm from both walls.
        let mut s = scene();
        s.mic_offsets = vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        s.target_offset = [0.0, 1.0, 0.0];
        s.interferer_offset = [0.0, -1.0, 0.0];
        s.room.dims[0] = 2.02;
        s.array_center[0] = 1.01;
        assert!(s.is_inside(0.0));
        let tight = ScenarioSpec {
            shift_bound: 1e-6,
            ..ScenarioSpec::protocol(ScenarioKind::Sce2, 1)
        };
        assert!(matches!(perturb_scenario(&s, &tight), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rejects_invalid_truth() {
        let mut s = scene();
        s.array_center = [10.0, 1.0, 1.0];
        assert!(perturb_scenario(&s, &ScenarioSpec::protocol(ScenarioKind::Sce2, 1)).is_err());
    }
}
