//! Python bindings: dictionary editing, case snapshots, code index,
//! cluster sizing and scripted agent sessions.

use std::path::PathBuf;
use std::sync::Arc;

use foampilot_core::agent::{self, run_session as core_run_session, NullSink, SessionPolicy};
use foampilot_core::case::{self, FoamNode};
use foampilot_core::hpc::{self, JobSpec, Layout};
use foampilot_core::index::{self, VectorIndex, DEFAULT_EMBED_MAX_TOKENS, DEFAULT_EXCLUDES, DEFAULT_INCLUDES};
use foampilot_core::llm::{HashEmbedder, MockProvider};
use foampilot_core::tools::{ApprovalMode, ApproveAll, DenyAll, RetrieveTool, ShellTool, ToolRegistry};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serialize through JSON into plain Python objects.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Value text such as `(0 0 1)` or `uniform 300` as a node.
fn parse_value(text: &str) -> PyResult<FoamNode> {
    let parsed = case::parse_dict(&format!("value {text};")).map_err(value_error)?;
    parsed
        .get("value")
        .cloned()
        .ok_or_else(|| PyValueError::new_err(format!("not a value: {text:?}")))
}

/// A parsed dictionary file.
#[pyclass(name = "FoamDict", module = "foampilot", frozen)]
struct PyFoamDict {
    root: FoamNode,
}

#[pymethods]
impl PyFoamDict {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let root = case::parse_dict(text).map_err(value_error)?;
        Ok(Self { root })
    }

    fn serialize(&self) -> String {
        case::serialize_dict(&self.root)
    }

    /// Text of the node at `keypath`, e.g. `geometry.burner.min`.
    fn get(&self, keypath: &str) -> PyResult<String> {
        let node = case::get_entry(&self.root, keypath).map_err(value_error)?;
        Ok(case::node_text(node))
    }

    /// Copy with the existing node at `keypath` replaced.
    fn set(&self, keypath: &str, value: &str) -> PyResult<Self> {
        let root = case::set_entry(&self.root, keypath, parse_value(value)?).map_err(value_error)?;
        Ok(Self { root })
    }

    /// Copy with the last key of `keypath` added or replaced.
    fn insert(&self, keypath: &str, value: &str) -> PyResult<Self> {
        let root = case::insert_entry(&self.root, keypath, parse_value(value)?).map_err(value_error)?;
        Ok(Self { root })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.root).map_err(value_error)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.root == other.root
    }

    fn __str__(&self) -> String {
        self.serialize()
    }
}

/// Exact-search index over a source tree, embedded with the hash embedder.
#[pyclass(name = "CodeIndex", module = "foampilot", frozen)]
struct PyCodeIndex {
    index: Arc<VectorIndex>,
}

fn hash_embedder_for(index: &VectorIndex) -> PyResult<HashEmbedder> {
    let embedder = HashEmbedder::new(index.dimension);
    if index.embed_model_tag != foampilot_core::llm::Embedder::model_tag(&embedder) {
        return Err(PyValueError::new_err(format!(
            "index was embedded with {:?}; only hash-embedded indexes can be queried here",
            index.embed_model_tag
        )));
    }
    Ok(embedder)
}

#[pymethods]
impl PyCodeIndex {
    #[staticmethod]
    #[pyo3(signature = (src, max_tokens = DEFAULT_EMBED_MAX_TOKENS))]
    fn build(py: Python<'_>, src: PathBuf, max_tokens: usize) -> PyResult<Self> {
        let index = py
            .detach(|| -> Result<VectorIndex, index::IndexError> {
                let entries = index::scan_corpus(&src, DEFAULT_INCLUDES, DEFAULT_EXCLUDES)?;
                let docs = index::prepare_documents(&src, &entries)?;
                index::build_index(docs, &HashEmbedder::default(), max_tokens)
            })
            .map_err(value_error)?;
        Ok(Self { index: Arc::new(index) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let index = index::load_index(&path).map_err(|e| PyOSError::new_err(e.to_string()))?;
        Ok(Self { index: Arc::new(index) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        index::save_index(&self.index, &path).map_err(|e| PyOSError::new_err(e.to_string()))
    }

    /// `(path, score)` pairs, best first.
    #[pyo3(signature = (query, k = 4))]
    fn search(&self, query: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let embedder = hash_embedder_for(&self.index)?;
        let hits = index::search(&self.index, &embedder.embed_one(query), k).map_err(value_error)?;
        Ok(hits.iter().map(|h| (h.doc.rel_path.clone(), h.score)).collect())
    }

    fn document(&self, rel_path: &str) -> Option<String> {
        self.index
            .docs
            .iter()
            .find(|d| d.doc.rel_path == rel_path)
            .map(|d| d.doc.full_text.clone())
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.index.dimension
    }

    #[getter]
    fn model_tag(&self) -> String {
        self.index.embed_model_tag.clone()
    }

    #[getter]
    fn truncated_count(&self) -> usize {
        self.index.truncated_count()
    }

    fn __len__(&self) -> usize {
        self.index.len()
    }
}

#[pyfunction]
fn estimate_tokens(text: &str) -> usize {
    agent::estimate_tokens(text)
}

#[pyfunction]
fn truncate_for_embedding(text: &str, max_tokens: usize) -> String {
    index::truncate_for_embedding(text, max_tokens).to_string()
}

/// The action in an assistant reply as a dict with `kind`, `tool_name`,
/// `tool_input` and `answer`.
#[pyfunction]
fn parse_action<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &agent::parse_action(text))
}

#[pyfunction]
fn flatten_case<'py>(py: Python<'py>, case_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let snapshot = case::flatten_case(&case_dir).map_err(value_error)?;
    to_python(py, &snapshot)
}

#[pyfunction]
fn build_config_prompt(case_dir: PathBuf, request: &str) -> PyResult<String> {
    let snapshot = case::flatten_case(&case_dir).map_err(value_error)?;
    Ok(case::build_config_prompt(&case_dir.to_string_lossy(), request, &snapshot))
}

/// Changes between two copies of a case, as dicts.
#[pyfunction]
fn diff_cases<'py>(py: Python<'py>, before_dir: PathBuf, after_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let before = case::load_case(&before_dir).map_err(value_error)?;
    let after = case::load_case(&after_dir).map_err(value_error)?;
    to_python(py, &case::diff_case(&before, &after))
}

#[pyfunction]
fn parse_resources<'py>(py: Python<'py>, sinfo_output: &str) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &hpc::parse_resources(sinfo_output).map_err(value_error)?)
}

#[pyfunction]
fn parse_cell_count(log_text: &str) -> PyResult<u64> {
    hpc::parse_cell_count(log_text).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (cells, sinfo_output, cells_per_core = hpc::DEFAULT_CELLS_PER_CORE, partition = None))]
fn choose_layout<'py>(
    py: Python<'py>,
    cells: u64,
    sinfo_output: &str,
    cells_per_core: u64,
    partition: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let resources = hpc::parse_resources(sinfo_output).map_err(value_error)?;
    let layout = hpc::choose_layout(cells, &resources, cells_per_core, partition).map_err(value_error)?;
    to_python(py, &layout)
}

#[pyfunction]
fn render_slurm_script(
    partition: String,
    nodes: u32,
    ntasks: u32,
    cores_per_node: u32,
    bashrc: PathBuf,
    case_dir: PathBuf,
) -> String {
    let layout = Layout {
        partition,
        nodes,
        ntasks,
        cores_per_node,
    };
    hpc::render_slurm_script(&JobSpec::new(&layout, &bashrc, &case_dir))
}

/// Run one agent session against scripted model replies, with a shell
/// tool in `workdir` and, when given, retrieval over `index`.
#[pyfunction]
#[pyo3(signature = (prompt, responses, workdir, approval = "auto", max_loops = 25, index = None))]
fn run_scripted_session<'py>(
    py: Python<'py>,
    prompt: &str,
    responses: Vec<String>,
    workdir: PathBuf,
    approval: &str,
    max_loops: usize,
    index: Option<&PyCodeIndex>,
) -> PyResult<Bound<'py, PyAny>> {
    let mode: ApprovalMode = approval.parse().map_err(PyValueError::new_err)?;
    let mut tools = ToolRegistry::new();
    tools.register(Arc::new(ShellTool::new(&workdir))).map_err(value_error)?;
    if let Some(index) = index {
        let embedder = hash_embedder_for(&index.index)?;
        let retrieve = RetrieveTool::new(Some(index.index.clone()), Arc::new(embedder));
        tools.register(Arc::new(retrieve)).map_err(value_error)?;
    }
    let policy = SessionPolicy {
        max_loops,
        approval_mode: mode,
        ..SessionPolicy::default()
    };
    let llm = MockProvider::from_responses(responses);
    // interactive mode has nobody to ask, so everything gated is denied
    let approver: &dyn foampilot_core::tools::Approver = match mode {
        ApprovalMode::Interactive | ApprovalMode::Allowlist => &DenyAll,
        ApprovalMode::AutoApprove => &ApproveAll,
    };
    let outcome = py
        .detach(|| core_run_session(prompt, &llm, &tools, policy, approver, &NullSink))
        .map_err(value_error)?;
    to_python(py, &outcome)
}

#[pymodule]
fn foampilot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFoamDict>()?;
    m.add_class::<PyCodeIndex>()?;
    m.add_function(wrap_pyfunction!(estimate_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(truncate_for_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(parse_action, m)?)?;
    m.add_function(wrap_pyfunction!(flatten_case, m)?)?;
    m.add_function(wrap_pyfunction!(build_config_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(diff_cases, m)?)?;
    m.add_function(wrap_pyfunction!(parse_resources, m)?)?;
    m.add_function(wrap_pyfunction!(parse_cell_count, m)?)?;
    m.add_function(wrap_pyfunction!(choose_layout, m)?)?;
    m.add_function(wrap_pyfunction!(render_slurm_script, m)?)?;
    m.add_function(wrap_pyfunction!(run_scripted_session, m)?)?;
    Ok(())
}
