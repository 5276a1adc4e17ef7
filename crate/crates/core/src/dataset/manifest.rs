use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Acceleration,
    QuaternionComponent,
    JointAngle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub name: String,
    pub sensor: String,
    pub kind: QuantityKind,
    pub unit: String,
}

impl ChannelDescriptor {
    pub fn new(name: &str, sensor: &str, kind: QuantityKind, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            sensor: sensor.to_string(),
            kind,
            unit: unit.to_string(),
        }
    }
}

/// Channel layout of a recording. Quaternion components of one sensor are
/// stored as a contiguous `w, x, y, z` group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelManifest {
    channel_count: usize,
    channels: Vec<ChannelDescriptor>,
}

#[derive(Deserialize)]
struct RawManifest {
    channel_count: usize,
    channels: Vec<ChannelDescriptor>,
}

impl<'de> Deserialize<'de> for ChannelManifest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawManifest::deserialize(d)?;
        if raw.channel_count != raw.channels.len() {
            return Err(serde::de::Error::custom(format!(
                "channel_count {} does not match {} descriptors",
                raw.channel_count,
                raw.channels.len()
            )));
        }
        ChannelManifest::new(raw.channels).map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_SENSORS: [&str; 9] = [
    "pelvis",
    "upper_thoracic",
    "head",
    "right_upper_arm",
    "right_forearm",
    "right_hand",
    "left_upper_arm",
    "left_forearm",
    "left_hand",
];

const DEFAULT_ANGLES: [&str; 7] = [
    "shoulder_flexion",
    "shoulder_abduction",
    "shoulder_rotation",
    "elbow_flexion",
    "forearm_pronation",
    "wrist_flexion",
    "wrist_deviation",
];

impl ChannelManifest {
    pub fn new(channels: Vec<ChannelDescriptor>) -> Result<Self> {
        if channels.is_empty() {
            return Err(DatasetError::InvalidManifest("no channels".into()));
        }
        let mut seen_quat_sensors = BTreeSet::new();
        let mut i = 0;
        while i < channels.len() {
            if channels[i].kind != QuantityKind::QuaternionComponent {
                i += 1;
                continue;
            }
            let sensor = &channels[i].sensor;
            let group = channels.get(i..i + 4).ok_or_else(|| {
                DatasetError::InvalidManifest(format!(
                    "quaternion group for sensor {sensor:?} at channel {i} is truncated"
                ))
            })?;
            if !group
                .iter()
                .all(|c| c.kind == QuantityKind::QuaternionComponent && &c.sensor == sensor)
            {
                return Err(DatasetError::InvalidManifest(format!(
                    "quaternion channels for sensor {sensor:?} at channel {i} are not a contiguous group of 4"
                )));
            }
            if !seen_quat_sensors.insert(sensor.clone()) {
                return Err(DatasetError::InvalidManifest(format!(
                    "sensor {sensor:?} has more than one quaternion group"
                )));
            }
            i += 4;
        }
        Ok(Self {
            channel_count: channels.len(),
            channels,
        })
    }

    /// The default 77-channel layout: 9 sensors x 4 quaternion components,
    /// 9 sensors x 3 acceleration axes and 14 joint angles (7 per side).
    pub fn default_77() -> Self {
        let mut channels = Vec::with_capacity(77);
        for sensor in DEFAULT_SENSORS {
            for comp in ["w", "x", "y", "z"] {
                channels.push(ChannelDescriptor::new(
                    &format!("{sensor}_q{comp}"),
                    sensor,
                    QuantityKind::QuaternionComponent,
                    "1",
                ));
            }
        }
        for sensor in DEFAULT_SENSORS {
            for axis in ["x", "y", "z"] {
                channels.push(ChannelDescriptor::new(
                    &format!("{sensor}_acc_{axis}"),
                    sensor,
                    QuantityKind::Acceleration,
                    "m/s^2",
                ));
            }
        }
        for side in ["right", "left"] {
            for angle in DEFAULT_ANGLES {
                channels.push(ChannelDescriptor::new(
                    &format!("{side}_{angle}"),
                    &format!("{side}_arm"),
                    QuantityKind::JointAngle,
                    "deg",
                ));
            }
        }
        Self::new(channels).expect("default manifest is valid")
    }

    /// A small layout for tests and quick runs: `n_quat_sensors` quaternion
    /// groups followed by `n_plain` acceleration channels.
    pub fn compact(n_quat_sensors: usize, n_plain: usize) -> Result<Self> {
        let mut channels = Vec::new();
        for s in 0..n_quat_sensors {
            let sensor = format!("sensor{s}");
            for comp in ["w", "x", "y", "z"] {
                channels.push(ChannelDescriptor::new(
                    &format!("{sensor}_q{comp}"),
                    &sensor,
                    QuantityKind::QuaternionComponent,
                    "1",
                ));
            }
        }
        for c in 0..n_plain {
            channels.push(ChannelDescriptor::new(
                &format!("acc{c}"),
                &format!("sensor{}", c / 3),
                QuantityKind::Acceleration,
                "m/s^2",
            ));
        }
        Self::new(channels)
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn channels(&self) -> &[ChannelDescriptor] {
        &self.channels
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    /// First channel index of every quaternion group.
    pub fn quaternion_groups(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.channels.len() {
            if self.channels[i].kind == QuantityKind::QuaternionComponent {
                out.push(i);
                i += 4;
            } else {
                i += 1;
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

impl Default for ChannelManifest {
    fn default() -> Self {
        Self::default_77()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_layout() {
        let m = ChannelManifest::default_77();
        assert_eq!(m.channel_count(), 77);
        assert_eq!(m.channels().len(), 77);
        assert_eq!(m.quaternion_groups(), (0..9).map(|s| 4 * s).collect::<Vec<_>>());
        let names: BTreeSet<_> = m.names().collect();
        assert_eq!(names.len(), 77);
    }

    #[test]
    fn rejects_split_quaternion_group() {
        let mut ch = ChannelManifest::compact(1, 1).unwrap().channels().to_vec();
        ch.swap(3, 4);
        assert!(ChannelManifest::new(ch).is_err());

        let ch = ChannelManifest::compact(1, 0).unwrap().channels()[..3].to_vec();
        assert!(ChannelManifest::new(ch).is_err());
    }

    #[test]
    fn json_count_must_match() {
        let m = ChannelManifest::compact(1, 2).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: ChannelManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let bad = text.replace("\"channel_count\":6", "\"channel_count\":7");
        assert!(serde_json::from_str::<ChannelManifest>(&bad).is_err());
    }
}
