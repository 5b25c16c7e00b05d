use rand::Rng;
use serde::Serialize;

use super::FeatureToggles;
use crate::autodiff::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Rotation by `quarter_turns * pi/2` (0, 1 or 2) about one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rotation {
    pub axis: Axis,
    pub quarter_turns: u8,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            axis: Axis::Z,
            quarter_turns: 0,
        }
    }

    /// Uniform over the three axes and the angles {0, pi/2, pi}.
    pub fn random(rng: &mut impl Rng) -> Self {
        let axis = [Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)];
        Rotation {
            axis,
            quarter_turns: rng.gen_range(0..3),
        }
    }

    /// Exact rotation matrix (entries in {-1, 0, 1}).
    pub fn matrix(&self) -> [[f32; 3]; 3] {
        let (c, s) = match self.quarter_turns % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        match self.axis {
            Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
            Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn apply(&self, p: [f32; 3]) -> [f32; 3] {
        let m = self.matrix();
        [0, 1, 2].map(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2])
    }
}

/// Rotates the xyz and normal blocks of a feature matrix in place; the
/// dihedral and HKS blocks are rotation invariant and left alone.
pub fn rotate_features(features: &mut Tensor<f32>, toggles: FeatureToggles, rotation: Rotation) {
    if rotation.quarter_turns == 0 {
        return;
    }
    let layout = toggles.layout();
    for offset in [layout.xyz, layout.normal].into_iter().flatten() {
        for r in 0..features.rows() {
            let row = &mut features.row_mut(r)[offset..offset + 3];
            let q = rotation.apply([row[0], row[1], row[2]]);
            row.copy_from_slice(&q);
        }
    }
}

/// Draws a random rotation and returns the rotated copy with it.
pub fn augment_rotation(features: &Tensor<f32>, toggles: FeatureToggles, rng: &mut impl Rng) -> (Tensor<f32>, Rotation) {
    let rotation = Rotation::random(rng);
    let mut out = features.clone();
    rotate_features(&mut out, toggles, rotation);
    (out, rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quarter_turn_about_z() {
        let r = Rotation {
            axis: Axis::Z,
            quarter_turns: 1,
        };
        assert_eq!(r.apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]);
        let half = Rotation {
            axis: Axis::X,
            quarter_turns: 2,
        };
        assert_eq!(half.apply([1.0, 2.0, 3.0]), [1.0, -2.0, -3.0]);
    }

    #[test]
    fn matrices_are_orthonormal() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for quarter_turns in 0..3 {
                let m = Rotation { axis, quarter_turns }.matrix();
                for i in 0..3 {
                    for j in 0..3 {
                        let d: f32 = (0..3).map(|k| m[i][k] * m[j][k]).sum();
                        assert_eq!(d, if i == j { 1.0 } else { 0.0 });
                    }
                }
            }
        }
    }

    #[test]
    fn only_xyz_and_normal_blocks_move() {
        let toggles = FeatureToggles::ALL;
        let f = Tensor::from_fn(5, 26, |r, c| (r * 26 + c) as f32 * 0.01 - 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut moved = false;
        for _ in 0..20 {
            let (g, rot) = augment_rotation(&f, toggles, &mut rng);
            for r in 0..5 {
                assert_eq!(&g.row(r)[6..], &f.row(r)[6..]);
            }
            if rot.quarter_turns == 0 {
                assert_eq!(g, f);
            } else {
                moved = true;
            }
        }
        assert!(moved);
    }

    #[test]
    fn draws_cover_every_axis_and_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..300 {
            let r = Rotation::random(&mut rng);
            seen.insert((r.axis as u8, r.quarter_turns));
        }
        assert_eq!(seen.len(), 9);
    }
}
