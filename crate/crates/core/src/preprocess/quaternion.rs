use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result};
use crate::dataset::{ChannelManifest, ImuRecording};

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes the components; `None` for a zero (or non-finite) norm.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return None;
        }
        Some(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Option<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return None;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn conj(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn renormalized(self) -> Self {
        let n = self.norm();
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

/// Hamilton product, renormalized.
impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, o: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
        .renormalized()
    }
}

/// Which frame provides the reference orientation of each sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "frame")]
pub enum ReferencePolicy {
    /// The calibration pose at the start of the recording.
    #[default]
    FirstFrame,
    Frame(usize),
}

/// Per-sensor reference orientations, applied frame by frame so that
/// streaming and batch processing share one code path.
#[derive(Debug, Clone)]
pub struct SensorCentric {
    groups: Vec<usize>,
    inv_refs: Vec<Quaternion>,
}

impl SensorCentric {
    pub fn from_reference_frame(manifest: &ChannelManifest, reference: &[f64], frame_index: usize) -> Result<Self> {
        if reference.len() != manifest.channel_count() {
            return Err(PreprocessError::ChannelMismatch {
                expected: manifest.channel_count(),
                found: reference.len(),
            });
        }
        let groups = manifest.quaternion_groups();
        let inv_refs = groups
            .iter()
            .map(|&g| {
                Quaternion::from_slice(&reference[g..g + 4])
                    .map(Quaternion::conj)
                    .ok_or(PreprocessError::ZeroNormQuaternion {
                        frame: frame_index,
                        channel: g,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { groups, inv_refs })
    }

    /// Replaces each quaternion group `q` by `conj(q_ref) * q` in place.
    pub fn apply(&self, frame: &mut [f64], frame_index: usize) -> Result<()> {
        for (&g, inv) in self.groups.iter().zip(&self.inv_refs) {
            let q = Quaternion::from_slice(&frame[g..g + 4]).ok_or(
                PreprocessError::ZeroNormQuaternion {
                    frame: frame_index,
                    channel: g,
                },
            )?;
            frame[g..g + 4].copy_from_slice(&(*inv * q).to_array());
        }
        Ok(())
    }
}

/// Expresses every sensor's orientation relative to its reference pose.
/// Non-quaternion channels pass through untouched.
pub fn sensor_centric_transform(
    recording: &ImuRecording,
    manifest: &ChannelManifest,
    policy: ReferencePolicy,
) -> Result<ImuRecording> {
    if recording.channel_count() != manifest.channel_count() {
        return Err(PreprocessError::ChannelMismatch {
            expected: manifest.channel_count(),
            found: recording.channel_count(),
        });
    }
    if recording.n_frames() == 0 {
        return Err(PreprocessError::EmptyRecording);
    }
    let ref_index = match policy {
        ReferencePolicy::FirstFrame => 0,
        ReferencePolicy::Frame(i) => i.min(recording.n_frames() - 1),
    };
    let sc = SensorCentric::from_reference_frame(manifest, recording.frame(ref_index), ref_index)?;
    let ch = recording.channel_count();
    let mut data = recording.data().to_vec();
    for (i, frame) in data.chunks_exact_mut(ch).enumerate() {
        sc.apply(frame, i)?;
    }
    Ok(recording.with_data(data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Textbook Hamilton product written out as a 4x4 matrix-vector product.
    fn oracle_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
        let [w, x, y, z] = a;
        let m = [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ];
        let mut out = [0.0; 4];
        for r in 0..4 {
            out[r] = (0..4).map(|c| m[r][c] * b[c]).sum();
        }
        out
    }

    fn rec_from_quats(quats: &[[f64; 4]], extra: f64) -> (ImuRecording, ChannelManifest) {
        let m = ChannelManifest::compact(1, 1).unwrap();
        let mut data = Vec::new();
        for q in quats {
            data.extend_from_slice(q);
            data.push(extra);
        }
        (ImuRecording::new("s", "a", 1, 100.0, 5, data).unwrap(), m)
    }

    #[test]
    fn self_reference_yields_identity() {
        let q = Quaternion::from_axis_angle([0.3, -0.2, 0.9], 1.1).unwrap().to_array();
        let (rec, m) = rec_from_quats(&[q, q, q], 2.5);
        let out = sensor_centric_transform(&rec, &m, ReferencePolicy::FirstFrame).unwrap();
        for f in out.frames() {
            assert!((f[0] - 1.0).abs() < 1e-12);
            assert!(f[1].abs() < 1e-12 && f[2].abs() < 1e-12 && f[3].abs() < 1e-12);
            assert_eq!(f[4], 2.5);
        }
    }

    #[test]
    fn identity_reference_is_passthrough() {
        let q1 = Quaternion::from_axis_angle([1.0, 0.0, 0.0], 0.4).unwrap().to_array();
        let q2 = Quaternion::from_axis_angle([0.0, 1.0, 1.0], -2.0).unwrap().to_array();
        let (rec, m) = rec_from_quats(&[[1.0, 0.0, 0.0, 0.0], q1, q2], -1.0);
        let out = sensor_centric_transform(&rec, &m, ReferencePolicy::FirstFrame).unwrap();
        for (a, b) in out.frame(1)[..4].iter().zip(q1) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in out.frame(2)[..4].iter().zip(q2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_relative_to_half_turn() {
        let r = Quaternion::from_axis_angle([0.0, 0.0, 1.0], PI / 2.0).unwrap();
        let t = Quaternion::from_axis_angle([0.0, 0.0, 1.0], PI).unwrap();
        let (rec, m) = rec_from_quats(&[r.to_array(), t.to_array()], 0.0);
        let out = sensor_centric_transform(&rec, &m, ReferencePolicy::FirstFrame).unwrap();
        let expected = oracle_mul(r.conj().to_array(), t.to_array());
        let quarter = Quaternion::from_axis_angle([0.0, 0.0, 1.0], PI / 2.0).unwrap().to_array();
        for i in 0..4 {
            assert!((out.frame(1)[i] - expected[i]).abs() < 1e-12);
            assert!((out.frame(1)[i] - quarter[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn product_matches_matrix_oracle() {
        let a = Quaternion::new(0.2, -0.5, 0.7, 0.1).unwrap();
        let b = Quaternion::new(-0.3, 0.4, 0.4, 0.9).unwrap();
        let got = (a * b).to_array();
        let want = oracle_mul(a.to_array(), b.to_array());
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_norm_quaternion_is_an_error() {
        let (rec, m) = rec_from_quats(&[[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]], 0.0);
        let err = sensor_centric_transform(&rec, &m, ReferencePolicy::FirstFrame).unwrap_err();
        assert!(matches!(err, PreprocessError::ZeroNormQuaternion { frame: 1, channel: 0 }));
    }
}
