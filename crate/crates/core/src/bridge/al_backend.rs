use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::convert::{bindings_for, label_to_result, to_instance, tokenize, HeadBinding};
use super::{BridgeError, SuggestionBackend, SuggestionEnvelope};
use crate::al::{
    suggest_with, train, ALConfig, EncoderClient, Extractor, HeadSpec, Instance, ModelSnapshot, MultiTaskModel, NativeConfig,
    NativeExtractor,
};
use crate::demographic::{augment, DemographicSchema};
use crate::schema::{empty_result_for, InterfaceSpec};
use crate::store::{AnnotationRecord, BackendKind, Task, User};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AlBackendConfig {
    #[serde(flatten)]
    pub al: ALConfig,
    pub native: NativeConfig,
    /// Frozen external encoder; when absent the native extractor trains.
    pub encoder: Option<EncoderClient>,
    /// Features prepended for the demographic back-end.
    pub demographics: DemographicSchema,
    /// Where to write each published snapshot, if anywhere.
    pub snapshot_dir: Option<PathBuf>,
}

struct Published {
    id: u64,
    model: Option<Arc<MultiTaskModel>>,
}

/// Multi-task active-learning back-end, optionally demographic-aware.
///
/// Retraining starts from a fresh seeded model on the whole labeled pool,
/// so a snapshot depends only on the pool contents.
pub struct AlBackend {
    kind: BackendKind,
    config: AlBackendConfig,
    spec: InterfaceSpec,
    bindings: Vec<HeadBinding>,
    /// Latest label per instance, or per (instance, annotator) when
    /// demographic.
    pool: Mutex<BTreeMap<(usize, String), Instance>>,
    published: RwLock<Published>,
    training: Mutex<()>,
}

impl AlBackend {
    pub fn new(kind: BackendKind, spec: &InterfaceSpec, config: AlBackendConfig) -> Result<Self, BridgeError> {
        config.al.validate().map_err(BridgeError::Config)?;
        let bindings = bindings_for(spec);
        if bindings.is_empty() {
            return Err(BridgeError::Unsupported("no selection, dropdown or button component to model".into()));
        }
        if kind == BackendKind::DemographicAl && config.demographics.is_empty() {
            return Err(BridgeError::Config("demographic_al needs at least one declared feature".into()));
        }
        Ok(Self {
            kind,
            config,
            spec: spec.clone(),
            bindings,
            pool: Mutex::new(BTreeMap::new()),
            published: RwLock::new(Published { id: 0, model: None }),
            training: Mutex::new(()),
        })
    }

    fn demographic(&self) -> bool {
        self.kind == BackendKind::DemographicAl
    }

    fn heads(&self) -> Vec<HeadSpec> {
        self.bindings.iter().map(|b| b.head.clone()).collect()
    }

    fn fresh_model(&self) -> Result<MultiTaskModel, BridgeError> {
        let seed = self.config.al.seed;
        let extractor = match &self.config.encoder {
            Some(client) => Extractor::External(client.clone()),
            None => Extractor::Native(NativeExtractor::new(self.config.native.clone(), seed)),
        };
        Ok(MultiTaskModel::with_extractor(extractor, &self.heads(), seed)?)
    }

    fn prepare(&self, inst: Instance, annotator: &User) -> Result<Instance, BridgeError> {
        if self.demographic() {
            Ok(augment(&inst, &self.config.demographics, &annotator.demographics)?.combined)
        } else {
            Ok(inst)
        }
    }

    pub fn pool_size(&self) -> usize {
        self.pool.lock().expect("pool poisoned").len()
    }

    pub fn current_model(&self) -> Option<Arc<MultiTaskModel>> {
        self.published.read().expect("snapshot lock poisoned").model.clone()
    }
}

impl SuggestionBackend for AlBackend {
    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn suggest(&self, task: &Task, index: usize, annotator: &User) -> Result<Option<SuggestionEnvelope>, BridgeError> {
        let (id, model) = {
            let p = self.published.read().expect("snapshot lock poisoned");
            (p.id, p.model.clone())
        };
        let Some(model) = model else { return Ok(None) };
        let Some(source) = task.document.source.get(index) else { return Ok(None) };
        let Some(inst) = to_instance(source, index, &self.spec, &self.bindings, None) else { return Ok(None) };
        let inst = self.prepare(inst, annotator)?;
        let predictions = suggest_with(&model, &inst, self.config.al.confidence_agg)?;
        let tokens = tokenize(source.as_text().unwrap_or_default());
        let mut results: Vec<_> = self.spec.components().iter().map(empty_result_for).collect();
        let mut suggested = Vec::new();
        let mut confidence = 0.0;
        for b in &self.bindings {
            let Some(pred) = predictions.get(&b.head.task_id) else { continue };
            if let Some(value) = label_to_result(&self.spec.components()[b.component], &tokens, &pred.labels) {
                results[b.component] = value;
                suggested.push(b.component);
                confidence += pred.confidence;
            }
        }
        Ok(Some(SuggestionEnvelope {
            backend: self.kind,
            confidence: (!suggested.is_empty()).then(|| confidence / suggested.len() as f64),
            results,
            suggested_components: suggested,
            model_snapshot_id: Some(id),
            prompt_log_id: None,
        }))
    }

    fn observe(&self, task: &Task, record: &AnnotationRecord, annotator: &User) -> Result<(), BridgeError> {
        let index = record.instance_index;
        let Some(source) = task.document.source.get(index) else { return Ok(()) };
        let Some(inst) = to_instance(source, index, &self.spec, &self.bindings, Some(&record.results)) else {
            return Ok(());
        };
        if inst.labels.is_empty() {
            return Ok(());
        }
        let inst = self.prepare(inst, annotator)?;
        let who = if self.demographic() { record.annotator_id.clone() } else { String::new() };
        self.pool.lock().expect("pool poisoned").insert((index, who), inst);
        Ok(())
    }

    fn wants_retrain(&self, submissions: u64) -> bool {
        submissions > 0 && submissions % self.config.al.retrain_every as u64 == 0
    }

    fn retrain(&self) -> Result<u64, BridgeError> {
        let _one_at_a_time = self.training.lock().expect("trainer poisoned");
        let pool: Vec<Instance> = self.pool.lock().expect("pool poisoned").values().cloned().collect();
        let refs: Vec<&Instance> = pool.iter().collect();
        let (model, stats) = train(&self.fresh_model()?, &refs, &self.config.al)?;
        let mut p = self.published.write().expect("snapshot lock poisoned");
        let id = p.id + 1;
        if let Some(dir) = &self.config.snapshot_dir {
            let path = dir.join(format!("snapshot-{id}.json"));
            if let Err(e) = ModelSnapshot::of(&model).save(&path) {
                log::warn!("could not write {}: {e}", path.display());
            }
        }
        *p = Published { id, model: Some(Arc::new(model)) };
        log::info!("published snapshot {id} from {} instances in {:.2}s", pool.len(), stats.wall_clock_secs);
        Ok(id)
    }

    fn snapshot_id(&self) -> u64 {
        self.published.read().expect("snapshot lock poisoned").id
    }

    fn status(&self) -> Value {
        json!({
            "backend": self.kind,
            "snapshot_id": self.snapshot_id(),
            "labeled": self.pool_size(),
            "heads": self.bindings.iter().map(|b| json!({"component": b.component, "task": b.head.task_id, "kind": b.head.kind})).collect::<Vec<_>>(),
            "retrain_every": self.config.al.retrain_every,
        })
    }
}
