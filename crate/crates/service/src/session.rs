//! Session state and the background recompute worker.
//!
//! Every configuration change bumps `version` and wakes the worker, which
//! runs the pipeline for the newest version only. A run polls the latest
//! requested version at each stage boundary and abandons itself once it is
//! stale; results that finish after being superseded are discarded, so
//! published versions only ever increase.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;

use axum::body::Bytes;
use ivl_core::pipeline::{run_pipeline_cancellable, ColorMode, CumulativeMap, PipelineOutput, Stage};
use ivl_core::roi::{pixels_to_roi, render_slice, DEFAULT_DIM_FACTOR};
use ivl_core::transfer::default_tfs;
use ivl_core::{Axis, Dataset, ExecMode, IvlError, PipelineParams, PlotMode, Roi, SliceImage, SpatialIndex};
use ivl_core::TransferFunction;
use serde::{Deserialize, Serialize, Serializer};
use tokio::sync::watch;

use crate::error::{ApiError, ApiResult};

/// Process-wide service settings.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    /// Plot width a freshly loaded dataset starts with.
    pub default_width: usize,
    pub exec: ExecMode,
    pub dim_factor: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            default_width: PipelineParams::default().width,
            exec: ExecMode::Parallel,
            dim_factor: DEFAULT_DIM_FACTOR,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub version: u64,
    pub cells: usize,
    pub fields: usize,
    pub field_names: Vec<String>,
    pub levels: Vec<u8>,
    pub bits: u32,
    pub extent: [u32; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigView {
    pub version: u64,
    #[serde(flatten)]
    pub params: PipelineParams,
    pub tfs: Vec<TransferFunction>,
    pub rois: Vec<Roi>,
}

/// Partial configuration update; absent keys keep their value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    /// Replacement transfer functions, matched to fields by name.
    pub tfs: Option<Vec<TransferFunction>>,
    #[serde(alias = "P")]
    pub exponent: Option<f64>,
    #[serde(alias = "eps_min")]
    pub min_importance: Option<f64>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub mode: Option<PlotMode>,
    pub color: Option<ColorMode>,
    pub rois: Option<Vec<Roi>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BrushOutcome {
    /// Configuration version carrying the new ROIs.
    pub version: u64,
    /// Version whose plot layout the pixel ranges were resolved against.
    pub based_on: u64,
    pub rois: Vec<Roi>,
}

pub enum PlotStatus {
    Ready(Bytes),
    Failed(String),
    Pending,
}

struct Loaded {
    ds: Arc<Dataset>,
    index: Arc<SpatialIndex>,
}

struct Config {
    version: u64,
    params: PipelineParams,
    tfs: Vec<TransferFunction>,
    rois: Vec<Roi>,
}

enum Outcome {
    Ready { body: Bytes, cumulative: Arc<CumulativeMap> },
    Failed(String),
}

struct Computed {
    version: u64,
    outcome: Outcome,
}

struct State {
    loaded: Option<Loaded>,
    config: Config,
    computed: Option<Arc<Computed>>,
    scheduled: bool,
    shutdown: bool,
}

struct Shared {
    state: Mutex<State>,
    wake: Condvar,
    /// Newest requested version, polled by in-flight runs.
    latest: AtomicU64,
    ready: watch::Sender<u64>,
    exec: ExecMode,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// One dataset, its configuration history and the recompute worker.
pub struct Session {
    shared: Arc<Shared>,
    settings: Settings,
    worker: Option<JoinHandle<()>>,
}

impl Session {
    pub fn new(settings: Settings) -> Self {
        let (ready, _) = watch::channel(0);
        let shared = Arc::new(Shared {
            state: Mutex::new(State {
                loaded: None,
                config: Config {
                    version: 0,
                    params: PipelineParams { width: settings.default_width, ..PipelineParams::default() },
                    tfs: Vec::new(),
                    rois: Vec::new(),
                },
                computed: None,
                scheduled: false,
                shutdown: false,
            }),
            wake: Condvar::new(),
            latest: AtomicU64::new(0),
            ready,
            exec: settings.exec,
        });
        let worker = {
            let shared = Arc::clone(&shared);
            std::thread::Builder::new()
                .name("ivl-pipeline".into())
                .spawn(move || worker(&shared))
                .expect("spawn pipeline worker")
        };
        Self { shared, settings, worker: Some(worker) }
    }

    pub fn settings(&self) -> Settings {
        self.settings
    }

    /// Replaces the dataset and resets the configuration. Blocking.
    pub fn load(&self, ds: Dataset) -> DatasetSummary {
        let index = Arc::new(ds.spatial_index());
        let tfs = default_tfs(&ds);
        let ds = Arc::new(ds);
        let mut st = self.shared.lock();
        st.config.params = PipelineParams { width: self.settings.default_width, ..PipelineParams::default() };
        st.config.tfs = tfs;
        st.config.rois.clear();
        st.computed = None;
        st.loaded = Some(Loaded { ds, index });
        self.schedule(&mut st);
        summary(&st).expect("dataset just loaded")
    }

    pub fn summary(&self) -> Option<DatasetSummary> {
        summary(&self.shared.lock())
    }

    pub fn config(&self) -> ApiResult<ConfigView> {
        let st = self.shared.lock();
        require_dataset(&st)?;
        Ok(ConfigView {
            version: st.config.version,
            params: st.config.params,
            tfs: st.config.tfs.clone(),
            rois: st.config.rois.clone(),
        })
    }

    /// Applies a partial update atomically; on error nothing changes.
    pub fn update(&self, patch: ConfigPatch) -> ApiResult<u64> {
        let mut st = self.shared.lock();
        let ds = Arc::clone(&require_dataset(&st)?.ds);
        let mut params = st.config.params;
        if let Some(v) = patch.exponent {
            params.exponent = v;
        }
        if let Some(v) = patch.min_importance {
            params.min_importance = v;
        }
        if let Some(v) = patch.width {
            params.width = v;
        }
        if let Some(v) = patch.height {
            params.height = v;
        }
        if let Some(v) = patch.mode {
            params.mode = v;
        }
        if let Some(v) = patch.color {
            params.color = v;
        }
        params.validate()?;
        let mut tfs = st.config.tfs.clone();
        for tf in patch.tfs.unwrap_or_default() {
            let k = ds
                .field_index(tf.field())
                .ok_or_else(|| ApiError::Invalid(format!("no field named '{}'", tf.field())))?;
            tfs[k] = tf;
        }
        if let Some(rois) = &patch.rois {
            for r in rois {
                Roi::new(r.lo, r.hi)?;
            }
        }
        st.config.params = params;
        st.config.tfs = tfs;
        if let Some(rois) = patch.rois {
            st.config.rois = rois;
        }
        Ok(self.schedule(&mut st))
    }

    /// Resolves pixel ranges against the newest computed layout and makes
    /// them the ROI set. An empty list clears the selection.
    pub fn brush(&self, ranges: &[(usize, usize)]) -> ApiResult<BrushOutcome> {
        let mut st = self.shared.lock();
        let ds = Arc::clone(&require_dataset(&st)?.ds);
        let computed = st
            .computed
            .clone()
            .ok_or_else(|| ApiError::Conflict("no plot has been computed yet".into()))?;
        let Outcome::Ready { cumulative, .. } = &computed.outcome else {
            return Err(ApiError::Conflict(format!("plot for version {} failed", computed.version)));
        };
        let mut rois = Vec::new();
        for &(x0, x1) in ranges {
            if let Some(roi) = pixels_to_roi(x0, x1, cumulative, &ds)? {
                rois.push(roi);
            }
        }
        st.config.rois = rois.clone();
        let version = self.schedule(&mut st);
        Ok(BrushOutcome { version, based_on: computed.version, rois })
    }

    pub fn plot(&self, version: u64) -> ApiResult<PlotStatus> {
        let st = self.shared.lock();
        if let Some(c) = st.computed.as_ref().filter(|c| c.version == version) {
            return Ok(match &c.outcome {
                Outcome::Ready { body, .. } => PlotStatus::Ready(body.clone()),
                Outcome::Failed(msg) => PlotStatus::Failed(msg.clone()),
            });
        }
        let current = st.config.version;
        if version == current && st.loaded.is_some() {
            Ok(PlotStatus::Pending)
        } else if version < current {
            Err(ApiError::NotFound(format!("version {version} was superseded by {current}")))
        } else {
            Err(ApiError::NotFound(format!("unknown version {version}")))
        }
    }

    /// Newest published version, `0` before the first.
    pub fn latest_ready(&self) -> u64 {
        *self.shared.ready.borrow()
    }

    pub fn current_version(&self) -> u64 {
        self.shared.lock().config.version
    }

    /// Renders a slice with the current transfer function and ROIs. Blocking.
    pub fn slice(&self, axis: Axis, coord: Option<f64>, field: Option<&str>) -> ApiResult<(u64, String, SliceImage)> {
        let (version, ds, index, tf, rois) = {
            let st = self.shared.lock();
            let loaded = require_dataset(&st)?;
            let k = match field {
                Some(name) => loaded
                    .ds
                    .field_index(name)
                    .ok_or_else(|| ApiError::Invalid(format!("no field named '{name}'")))?,
                None => 0,
            };
            (
                st.config.version,
                Arc::clone(&loaded.ds),
                Arc::clone(&loaded.index),
                st.config.tfs[k].clone(),
                st.config.rois.clone(),
            )
        };
        let coord = coord.unwrap_or_else(|| f64::from(ds.extent()[axis.index()]) / 2.0);
        let name = tf.field().to_owned();
        let img = render_slice(&ds, &index, &tf, &name, axis, coord, &rois, self.settings.dim_factor)?;
        Ok((version, name, img))
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.shared.ready.subscribe()
    }

    fn schedule(&self, st: &mut State) -> u64 {
        st.config.version += 1;
        st.scheduled = true;
        self.shared.latest.store(st.config.version, Ordering::Release);
        self.shared.wake.notify_one();
        st.config.version
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shared.lock().shutdown = true;
        self.shared.latest.store(u64::MAX, Ordering::Release);
        self.shared.wake.notify_one();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn require_dataset(st: &State) -> ApiResult<&Loaded> {
    st.loaded
        .as_ref()
        .ok_or_else(|| ApiError::Conflict("no dataset loaded".into()))
}

fn summary(st: &State) -> Option<DatasetSummary> {
    let ds = &st.loaded.as_ref()?.ds;
    Some(DatasetSummary {
        version: st.config.version,
        cells: ds.len(),
        fields: ds.fields().len(),
        field_names: ds.fields().iter().map(|f| f.name().to_owned()).collect(),
        levels: ds.levels(),
        bits: ds.bits(),
        extent: ds.extent(),
    })
}

fn worker(shared: &Shared) {
    loop {
        let (version, ds, tfs, params) = {
            let mut st = shared.lock();
            while !st.scheduled && !st.shutdown {
                st = shared.wake.wait(st).unwrap_or_else(|p| p.into_inner());
            }
            if st.shutdown {
                return;
            }
            st.scheduled = false;
            let Some(loaded) = &st.loaded else { continue };
            (st.config.version, Arc::clone(&loaded.ds), st.config.tfs.clone(), st.config.params)
        };
        let stale = || shared.latest.load(Ordering::Acquire) != version;
        let outcome = match run_pipeline_cancellable(&ds, &tfs, &params, shared.exec, &stale) {
            Ok(out) => {
                let body = plot_body(version, &out);
                Outcome::Ready { body, cumulative: Arc::new(out.cumulative) }
            }
            Err(IvlError::Cancelled) => {
                tracing::debug!(version, "run cancelled");
                continue;
            }
            Err(e) => Outcome::Failed(e.to_string()),
        };
        let mut st = shared.lock();
        if st.config.version != version {
            continue;
        }
        match &outcome {
            Outcome::Ready { .. } => tracing::info!(version, "plot ready"),
            Outcome::Failed(msg) => tracing::warn!(version, error = %msg, "plot failed"),
        }
        st.computed = Some(Arc::new(Computed { version, outcome }));
        shared.ready.send_replace(version);
    }
}

#[derive(Serialize)]
struct PlotBody<'a> {
    version: u64,
    width: usize,
    fields: &'a [ivl_core::pipeline::SeriesField],
    cumulative: CumulativeSummary,
    #[serde(serialize_with = "stage_millis")]
    timings_ms: &'a ivl_core::pipeline::StageTimings,
    total_ms: f64,
    adds: ivl_core::pipeline::AddsSummary,
}

#[derive(Serialize)]
struct CumulativeSummary {
    cells: usize,
    width: usize,
    total: f64,
}

fn stage_millis<S: Serializer>(t: &&ivl_core::pipeline::StageTimings, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(Stage::ALL.iter().map(|&st| (st.name(), t.millis(st))))
}

fn plot_body(version: u64, out: &PipelineOutput) -> Bytes {
    let body = PlotBody {
        version,
        width: out.series.width,
        fields: &out.series.fields,
        cumulative: CumulativeSummary {
            cells: out.cumulative.len(),
            width: out.cumulative.width(),
            total: out.cumulative.total(),
        },
        timings_ms: &out.stats.timings,
        total_ms: out.stats.timings.total().as_secs_f64() * 1e3,
        adds: out.stats.adds,
    };
    Bytes::from(serde_json::to_vec(&body).expect("plot body serializes"))
}
