use crate::error::{Error, Result};
use crate::tensor::{wrap_angle, Tensor};

/// Waypoints `(x, y, θ)` in the ego frame at planning time.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<[f64; 3]>,
}

/// `N` consecutive waypoints of a trajectory; `index` counts from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub index: usize,
    pub waypoints: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<[f64; 3]>) -> Self {
        Self { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.len(), 3], self.waypoints.iter().flatten().copied().collect()).expect("T×3 layout")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.rank() != 2 || t.shape()[1] != 3 {
            return Err(crate::error::shape_err("Trajectory::from_tensor", t.shape(), &[0, 3]));
        }
        Ok(Self { waypoints: t.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect() })
    }

    /// Copy with every heading wrapped to `(−π, π]`.
    pub fn wrapped(&self) -> Self {
        Self { waypoints: self.waypoints.iter().map(|w| [w[0], w[1], wrap_angle(w[2])]).collect() }
    }

    /// Rebuilds a trajectory from its segments in order.
    pub fn from_segments(segments: &[TrajectorySegment]) -> Self {
        Self { waypoints: segments.iter().flat_map(|s| s.waypoints.iter().copied()).collect() }
    }
}

/// Splits `w` into `k` segments of equal length, in order.
pub fn segment_trajectory(w: &Trajectory, k: usize) -> Result<Vec<TrajectorySegment>> {
    if k == 0 || !w.len().is_multiple_of(k) {
        return Err(Error::Config(format!("trajectory of {} waypoints cannot split into {k} equal segments", w.len())));
    }
    let n = w.len() / k;
    Ok(w.waypoints
        .chunks(n)
        .enumerate()
        .map(|(i, c)| TrajectorySegment { index: i + 1, waypoints: c.to_vec() })
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ramp(t: usize) -> Trajectory {
        Trajectory::new((0..t).map(|i| [i as f64, 0.5 * i as f64, 0.01 * i as f64]).collect())
    }

    #[test]
    fn eight_waypoints_four_segments_of_two() {
        let segs = segment_trajectory(&ramp(8), 4).unwrap();
        assert_eq!(segs.len(), 4);
        assert!(segs.iter().all(|s| s.waypoints.len() == 2));
        assert_eq!(segs[2].index, 3);
        assert_eq!(segs[2].waypoints[0], [4.0, 2.0, 0.04]);
    }

    #[test]
    fn single_segment_is_the_trajectory() {
        let w = ramp(8);
        let segs = segment_trajectory(&w, 1).unwrap();
        assert_eq!(segs[0].waypoints, w.waypoints);
    }

    #[test]
    fn indivisible_split_is_an_error() {
        assert!(matches!(segment_trajectory(&ramp(8), 3), Err(Error::Config(_))));
        assert!(segment_trajectory(&ramp(8), 0).is_err());
    }

    #[test]
    fn tensor_round_trip() {
        let w = ramp(8);
        assert_eq!(Trajectory::from_tensor(&w.to_tensor()).unwrap(), w);
    }

    proptest! {
        #[test]
        fn segments_reassemble_exactly(vals in prop::collection::vec(-50.0f64..50.0, 24), k in prop::sample::select(vec![1usize, 2, 4, 8])) {
            let w = Trajectory::new(vals.chunks(3).map(|c| [c[0], c[1], c[2]]).collect());
            let segs = segment_trajectory(&w, k).unwrap();
            prop_assert_eq!(segs.len(), k);
            prop_assert_eq!(Trajectory::from_segments(&segs), w);
        }
    }
}
