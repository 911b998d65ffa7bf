//! Versioned model snapshot files (structured JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlError, MultiTaskModel};

pub const SNAPSHOT_FORMAT: &str = "quill-model";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub format: String,
    pub version: u32,
    pub feature_dim: usize,
    pub model: MultiTaskModel,
}

impl ModelSnapshot {
    pub fn of(model: &MultiTaskModel) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            feature_dim: model.dim(),
            model: model.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, AlError> {
        serde_json::to_string(self).map_err(|e| AlError::Snapshot(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, AlError> {
        let snap: ModelSnapshot = serde_json::from_str(text).map_err(|e| AlError::Snapshot(e.to_string()))?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(AlError::Snapshot(format!("not a model snapshot: format `{}`", snap.format)));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(AlError::Snapshot(format!("unsupported snapshot version {}", snap.version)));
        }
        if snap.feature_dim != snap.model.dim() {
            return Err(AlError::Snapshot("feature_dim disagrees with the extractor".into()));
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<(), AlError> {
        std::fs::write(path, self.to_json()?).map_err(|e| AlError::Snapshot(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AlError> {
        let text = std::fs::read_to_string(path).map_err(|e| AlError::Snapshot(e.to_string()))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::al::{HeadSpec, NativeConfig, TaskKind};

    #[test]
    fn round_trip_and_version_check() {
        let model = MultiTaskModel::native(
            NativeConfig { buckets: 32, dim: 4, ..Default::default() },
            &[HeadSpec::new("t", TaskKind::Sequence, &["O", "B-X", "I-X"])],
            1,
        )
        .unwrap();
        let snap = ModelSnapshot::of(&model);
        let back = ModelSnapshot::from_json(&snap.to_json().unwrap()).unwrap();
        assert_eq!(back.model, model);

        let mut future = snap.clone();
        future.version = 99;
        assert!(ModelSnapshot::from_json(&future.to_json().unwrap()).is_err());
    }
}
