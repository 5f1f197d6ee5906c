//! Tool registry: catalog loading, the four wrapper contracts, binding
//! resolution against the scratchpad, masking and schema export.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;
use toolplan_tabular::{Column, ModelKind, ParamGrid, Table, TabularError};

use crate::artifact::{Artifact, ObjectKind};
use crate::message::ToolCall;
use crate::scratchpad::{NodePad, PathView, Scratchpad, ScratchpadError};
use crate::stage::StageId;
use crate::tools;

pub const CATALOG_TOML: &str = include_str!("../assets/catalog.toml");
pub const FAILURE_SUFFIX: &str = "\n Please fix your mistakes.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapperKind {
    Set,
    Get,
    GetSet,
    Override,
}

impl WrapperKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WrapperKind::Set => "Set",
            WrapperKind::Get => "Get",
            WrapperKind::GetSet => "GetSet",
            WrapperKind::Override => "Override",
        }
    }

    /// How the wrapped tool talks to the scratchpad, shown in feedback.
    pub fn usage(self) -> &'static str {
        match self {
            WrapperKind::Set => "This tool passes `func_kwargs` to the internal function and saves the result to the scratchpad under the key given in `output`.",
            WrapperKind::Get => "This tool reads arguments from the scratchpad using `bindings`, passes them to the internal function together with `func_kwargs`, and returns the result as text without saving anything.",
            WrapperKind::GetSet => "This tool reads arguments from the scratchpad using `bindings`, passes them to the internal function.\n\nArguments: `bindings` maps parameter names to scratchpad keys, `func_kwargs` holds literal parameters and `output` is the scratchpad key the result is saved under.",
            WrapperKind::Override => "This tool reads a dataframe from the scratchpad using `bindings`, passes it to the internal function together with `func_kwargs`, and overwrites the same scratchpad key with the result (or saves it under `output` when given).",
        }
    }

    fn output_required(self) -> bool {
        matches!(self, WrapperKind::Set | WrapperKind::GetSet)
    }
}

impl fmt::Display for WrapperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralKind {
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
    Scalar,
    StringOrArray,
    Any,
}

impl LiteralKind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            LiteralKind::String => v.is_string(),
            LiteralKind::Integer => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|f| f.fract() == 0.0),
            LiteralKind::Number => v.is_number(),
            LiteralKind::Boolean => v.is_boolean(),
            LiteralKind::Array => v.is_array(),
            LiteralKind::Object => v.is_object(),
            LiteralKind::Scalar => v.is_string() || v.is_number() || v.is_boolean(),
            LiteralKind::StringOrArray => v.is_string() || v.is_array(),
            LiteralKind::Any => true,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            LiteralKind::String => "a string",
            LiteralKind::Integer => "an integer",
            LiteralKind::Number => "a number",
            LiteralKind::Boolean => "a boolean",
            LiteralKind::Array => "a list",
            LiteralKind::Object => "a mapping",
            LiteralKind::Scalar => "a string, number or boolean",
            LiteralKind::StringOrArray => "a string or a list of strings",
            LiteralKind::Any => "any value",
        }
    }

    fn schema(self) -> Value {
        match self {
            LiteralKind::String => json!({"type": "string"}),
            LiteralKind::Integer => json!({"type": "integer"}),
            LiteralKind::Number => json!({"type": "number"}),
            LiteralKind::Boolean => json!({"type": "boolean"}),
            LiteralKind::Array => json!({"type": "array"}),
            LiteralKind::Object => json!({"type": "object"}),
            LiteralKind::Scalar => json!({"type": ["string", "number", "boolean"]}),
            LiteralKind::StringOrArray => json!({"anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}}]}),
            LiteralKind::Any => json!({}),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamSource {
    Binding(Vec<ObjectKind>),
    Literal(LiteralKind),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub source: ParamSource,
    pub required: bool,
    pub default: Option<Value>,
    pub type_label: String,
    pub doc: String,
}

impl ParamSpec {
    pub fn is_binding(&self) -> bool {
        matches!(self.source, ParamSource::Binding(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToolDescriptor {
    pub name: String,
    pub summary: String,
    pub docstring: String,
    pub wrapper: WrapperKind,
    pub stages: Vec<StageId>,
    pub params: Vec<ParamSpec>,
    /// Learner behind fit_/tune_ tools.
    pub model: Option<ModelKind>,
    /// Search grid of tune_ tools.
    pub grid: Option<ParamGrid>,
}

impl ToolDescriptor {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn has_stage(&self, s: StageId) -> bool {
        self.stages.contains(&s)
    }

    /// Usage text of the wrapper followed by the docstring.
    pub fn signature(&self) -> String {
        format!("{}\n\n{}", self.wrapper.usage(), indent_doc(&self.docstring))
    }

    /// OpenAI-style function-calling schema.
    pub fn schema(&self) -> Value {
        let mut bind_props = Map::new();
        let mut bind_req = Vec::new();
        let mut kw_props = Map::new();
        let mut kw_req = Vec::new();
        for p in &self.params {
            match &p.source {
                ParamSource::Binding(kinds) => {
                    let kinds: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
                    bind_props.insert(
                        p.name.clone(),
                        json!({
                            "type": "string",
                            "description": format!("Scratchpad key of a {} ({})", kinds.join(" or "), p.doc),
                        }),
                    );
                    if p.required {
                        bind_req.push(p.name.clone());
                    }
                }
                ParamSource::Literal(kind) => {
                    let mut s = kind.schema();
                    let obj = s.as_object_mut().expect("schema is an object");
                    obj.insert("description".into(), Value::String(p.doc.clone()));
                    if let Some(d) = &p.default {
                        obj.insert("default".into(), d.clone());
                    }
                    kw_props.insert(p.name.clone(), s);
                    if p.required {
                        kw_req.push(p.name.clone());
                    }
                }
            }
        }
        let mut props = Map::new();
        let mut required = Vec::new();
        if !bind_props.is_empty() {
            props.insert(
                "bindings".into(),
                json!({"type": "object", "properties": bind_props, "required": bind_req,
                       "description": "Parameter name to scratchpad key"}),
            );
            required.push("bindings".to_string());
        }
        if !kw_props.is_empty() {
            props.insert(
                "func_kwargs".into(),
                json!({"type": "object", "properties": kw_props, "required": kw_req,
                       "description": "Literal parameter values"}),
            );
            if !kw_req.is_empty() {
                required.push("func_kwargs".to_string());
            }
        }
        match self.wrapper {
            WrapperKind::Get => {}
            WrapperKind::Override => {
                props.insert(
                    "output".into(),
                    json!({"type": "string", "description": "Scratchpad key for the result; defaults to the input's key"}),
                );
            }
            WrapperKind::Set | WrapperKind::GetSet => {
                props.insert("output".into(), json!({"type": "string", "description": "Scratchpad key for the result"}));
                required.push("output".to_string());
            }
        }
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.docstring,
                "parameters": {"type": "object", "properties": props, "required": required},
            }
        })
    }
}

fn indent_doc(doc: &str) -> String {
    doc.lines().map(|l| if l.is_empty() { "    ".to_string() } else { format!("    {l}") }).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------------------
// Catalog file

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    tool: Vec<CatalogTool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogTool {
    name: String,
    wrapper: WrapperKind,
    stages: Vec<StageId>,
    summary: String,
    #[serde(default)]
    details: Option<String>,
    returns: String,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    grid: Option<ParamGrid>,
    params: Vec<CatalogParam>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogParam {
    name: String,
    #[serde(default)]
    kinds: Option<Vec<String>>,
    #[serde(default)]
    literal: Option<LiteralKind>,
    #[serde(default)]
    default: Option<toml::Value>,
    #[serde(default)]
    optional: bool,
    #[serde(default, rename = "type")]
    type_label: Option<String>,
    doc: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("tool '{tool}': {detail}")]
    Invalid { tool: String, detail: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn parse_kind(s: &str) -> Option<Vec<ObjectKind>> {
    if s == "DataFrame" {
        return Some(vec![ObjectKind::Table, ObjectKind::TrainTestPair, ObjectKind::PredictionTable]);
    }
    ObjectKind::ALL.into_iter().find(|k| k.as_str() == s).map(|k| vec![k])
}

fn build_docstring(t: &CatalogTool, params: &[ParamSpec]) -> String {
    let mut doc = t.summary.clone();
    if let Some(d) = &t.details {
        doc.push_str("\n\n");
        doc.push_str(d);
    }
    doc.push_str("\n\nParameters\n----------\n");
    for p in params {
        let default = match &p.default {
            Some(Value::String(s)) => format!(", default='{s}'"),
            Some(v) => format!(", default={}", py_literal(v)),
            None => String::new(),
        };
        doc.push_str(&format!("{} : {}{}\n    {}\n", p.name, p.type_label, default, p.doc));
    }
    doc.push_str("\nReturns\n-------\n");
    doc.push_str(&t.returns);
    doc
}

fn py_literal(v: &Value) -> String {
    match v {
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Null => "None".into(),
        other => other.to_string(),
    }
}

impl CatalogTool {
    fn into_descriptor(self) -> Result<ToolDescriptor, CatalogError> {
        let invalid = |detail: String| CatalogError::Invalid { tool: self.name.clone(), detail };
        let mut params = Vec::new();
        for p in &self.params {
            let source = match (&p.kinds, p.literal) {
                (Some(kinds), None) => {
                    let mut out = Vec::new();
                    for k in kinds {
                        out.extend(parse_kind(k).ok_or_else(|| invalid(format!("unknown object kind '{k}'")))?);
                    }
                    ParamSource::Binding(out)
                }
                (None, Some(l)) => ParamSource::Literal(l),
                _ => return Err(invalid(format!("param '{}' needs exactly one of kinds/literal", p.name))),
            };
            let default = p
                .default
                .clone()
                .map(|d| serde_json::to_value(d).map_err(|e| invalid(e.to_string())))
                .transpose()?;
            let type_label = p.type_label.clone().unwrap_or_else(|| match &source {
                ParamSource::Binding(_) => "DataFrame".to_string(),
                ParamSource::Literal(_) => "Any".to_string(),
            });
            params.push(ParamSpec {
                name: p.name.clone(),
                required: default.is_none() && !p.optional,
                source,
                default,
                type_label,
                doc: p.doc.clone(),
            });
        }
        let model = self
            .model
            .as_deref()
            .map(|m| m.parse::<ModelKind>().map_err(|e| invalid(e.to_string())))
            .transpose()?;
        if self.stages.is_empty() {
            return Err(invalid("no stage tags".into()));
        }
        let docstring = build_docstring(&self, &params);
        Ok(ToolDescriptor {
            name: self.name,
            summary: self.summary,
            docstring,
            wrapper: self.wrapper,
            stages: self.stages,
            params,
            model,
            grid: self.grid,
        })
    }
}

/// Parse catalog text into descriptors (no implementations attached).
pub fn parse_catalog(text: &str) -> Result<Vec<ToolDescriptor>, CatalogError> {
    let file: CatalogFile = toml::from_str(text)?;
    file.tool.into_iter().map(CatalogTool::into_descriptor).collect()
}

// ---------------------------------------------------------------------------
// Invocation

/// Execution environment shared by all tools of one trial.
#[derive(Clone, Debug, Default)]
pub struct ToolEnv {
    /// Base directory for relative paths.
    pub workdir: PathBuf,
    pub seed: u64,
    pub target: Option<String>,
    pub id_column: Option<String>,
    /// Ids of the competition test rows, prepended to predictions.
    pub test_ids: Option<Arc<Column>>,
}

impl ToolEnv {
    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = PathBuf::from(p);
        if path.is_absolute() {
            path
        } else {
            self.workdir.join(path)
        }
    }
}

/// Filesystem effect of a successful call.
#[derive(Clone, Debug, PartialEq)]
pub enum IoEvent {
    Read { path: PathBuf },
    WroteTable { path: PathBuf, table: Arc<Table> },
    WroteModel { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    UnknownTool,
    MaskedTool,
    BindingUnresolved,
    KindMismatch,
    ToolRuntimeError,
    MissingRequiredArg,
    InvalidArgument,
    MalformedCall,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToolResult {
    pub ok: bool,
    pub message: String,
    pub created: Vec<(String, ObjectKind)>,
    pub error_kind: Option<ErrorKind>,
    pub io: Option<IoEvent>,
}

impl ToolResult {
    pub fn failure(kind: ErrorKind, detail: &str) -> ToolResult {
        ToolResult {
            ok: false,
            message: format!("Error: {detail}{FAILURE_SUFFIX}"),
            created: Vec::new(),
            error_kind: Some(kind),
            io: None,
        }
    }
}

/// A failure raised by a tool implementation or by argument checking.
#[derive(Clone, Debug, PartialEq)]
pub struct ToolFailure {
    pub kind: ErrorKind,
    pub class: String,
    pub detail: String,
}

impl ToolFailure {
    pub fn new(kind: ErrorKind, class: &str, detail: impl Into<String>) -> ToolFailure {
        ToolFailure { kind, class: class.to_string(), detail: detail.into() }
    }

    pub fn type_error(detail: impl Into<String>) -> ToolFailure {
        ToolFailure::new(ErrorKind::InvalidArgument, "TypeError", detail)
    }

    pub fn value_error(detail: impl Into<String>) -> ToolFailure {
        ToolFailure::new(ErrorKind::InvalidArgument, "ValueError", detail)
    }

    /// `Class('detail')` as Python would print the exception.
    pub fn render(&self) -> String {
        format!("{}({})", self.class, py_repr(&self.detail))
    }
}

impl From<TabularError> for ToolFailure {
    fn from(e: TabularError) -> Self {
        ToolFailure::new(ErrorKind::ToolRuntimeError, e.python_class(), e.to_string())
    }
}

/// Python `repr` of a string.
pub fn py_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Python dict rendering of a string map.
pub fn py_str_dict<'a>(items: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let parts: Vec<String> = items.into_iter().map(|(k, v)| format!("{}: {}", py_repr(k), py_repr(v))).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Resolved arguments handed to a tool implementation.
pub struct ToolArgs<'a> {
    pub desc: &'a ToolDescriptor,
    pub bound: BTreeMap<String, Artifact>,
    /// Literal arguments with defaults filled in.
    pub kwargs: Map<String, Value>,
    pub env: &'a ToolEnv,
}

/// What a tool produced.
#[derive(Default)]
pub struct ToolOutput {
    /// Main result, saved under `output` (Set/GetSet) or the input key
    /// (Override).
    pub value: Option<Artifact>,
    /// Additional results saved under fixed names.
    pub extra: Vec<(String, Artifact)>,
    /// Human-readable result shown in the tool message.
    pub text: String,
    pub io: Option<IoEvent>,
}

pub type ToolFn = Arc<dyn Fn(&ToolArgs) -> Result<ToolOutput, ToolFailure> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("tool '{0}' is already registered")]
    DuplicateToolName(String),
    #[error("no tools are assigned to stage '{0}'")]
    EmptySubtaskToolset(StageId),
    #[error("catalog tool '{0}' has no implementation")]
    MissingImplementation(String),
}

struct Registered {
    desc: ToolDescriptor,
    func: ToolFn,
}

/// Immutable after construction; share it across trials behind an `Arc`.
#[derive(Default)]
pub struct Registry {
    tools: Vec<Registered>,
    index: HashMap<String, usize>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("tools", &self.names()).finish()
    }
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// The bundled catalog with built-in implementations.
    pub fn with_catalog() -> Result<Registry, CatalogError> {
        Registry::from_catalog_text(CATALOG_TOML)
    }

    pub fn from_catalog_text(text: &str) -> Result<Registry, CatalogError> {
        let mut reg = Registry::new();
        for desc in parse_catalog(text)? {
            let func = tools::builtin(&desc.name).ok_or_else(|| RegistryError::MissingImplementation(desc.name.clone()))?;
            reg.register(desc, func)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, desc: ToolDescriptor, func: ToolFn) -> Result<(), RegistryError> {
        if self.index.contains_key(&desc.name) {
            return Err(RegistryError::DuplicateToolName(desc.name));
        }
        self.index.insert(desc.name.clone(), self.tools.len());
        self.tools.push(Registered { desc, func });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ToolDescriptor> {
        self.index.get(name).map(|&i| &self.tools[i].desc)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ToolDescriptor> {
        self.tools.iter().map(|t| &t.desc)
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.desc.name.as_str()).collect()
    }

    /// Every tool exposed.
    pub fn full(&self) -> RegistryView<'_> {
        RegistryView { registry: self, mask: None }
    }

    /// Only the tools tagged with `stage`.
    pub fn mask(&self, stage: StageId) -> Result<RegistryView<'_>, RegistryError> {
        if !self.tools.iter().any(|t| t.desc.has_stage(stage)) {
            return Err(RegistryError::EmptySubtaskToolset(stage));
        }
        Ok(RegistryView { registry: self, mask: Some(stage) })
    }
}

/// The tools an agent can see: everything, or one stage's tools.
#[derive(Clone, Copy)]
pub struct RegistryView<'a> {
    registry: &'a Registry,
    mask: Option<StageId>,
}

impl<'a> RegistryView<'a> {
    pub fn mask_stage(&self) -> Option<StageId> {
        self.mask
    }

    pub fn registry(&self) -> &'a Registry {
        self.registry
    }

    pub fn exposes(&self, desc: &ToolDescriptor) -> bool {
        self.mask.is_none_or(|s| desc.has_stage(s))
    }

    pub fn exposed(&self) -> Vec<&'a ToolDescriptor> {
        self.registry.descriptors().filter(|d| self.exposes(d)).collect()
    }

    pub fn exposed_names(&self) -> Vec<String> {
        self.exposed().into_iter().map(|d| d.name.clone()).collect()
    }

    pub fn export_schemas(&self) -> Vec<Value> {
        self.exposed().into_iter().map(ToolDescriptor::schema).collect()
    }

    /// Run `call` against the path `view`, writing outputs into `child_pad`.
    /// On failure `child_pad` is left untouched.
    pub fn invoke(
        &self,
        call: &ToolCall,
        store: &Scratchpad,
        view: &PathView,
        child_pad: &mut NodePad,
        env: &ToolEnv,
    ) -> ToolResult {
        let Some(&idx) = self.registry.index.get(&call.tool) else {
            return ToolResult::failure(
                ErrorKind::UnknownTool,
                &format!("{} is not a valid tool, try one of [{}].", call.tool, self.exposed_names().join(", ")),
            );
        };
        let reg = &self.registry.tools[idx];
        let desc = &reg.desc;
        if !self.exposes(desc) {
            return ToolResult::failure(
                ErrorKind::MaskedTool,
                &format!(
                    "{} is not available in the current stage, try one of [{}].",
                    call.tool,
                    self.exposed_names().join(", ")
                ),
            );
        }
        let args = match prepare_args(desc, call, store, view, env) {
            Ok(a) => a,
            Err(f) => return ToolResult::failure(f.kind, &f.render()),
        };
        let out = match (reg.func)(&args) {
            Ok(o) => o,
            Err(f) => return ToolResult::failure(f.kind, &f.render()),
        };
        match write_outputs(desc, call, out, child_pad) {
            Ok(r) => r,
            Err(f) => ToolResult::failure(f.kind, &f.render()),
        }
    }
}

fn python_arg_list(names: &[&str]) -> String {
    let quoted: Vec<String> = names.iter().map(|n| format!("'{n}'")).collect();
    match quoted.len() {
        0 => String::new(),
        1 => quoted[0].clone(),
        2 => format!("{} and {}", quoted[0], quoted[1]),
        n => format!("{}, and {}", quoted[..n - 1].join(", "), quoted[n - 1]),
    }
}

fn prepare_args<'a>(
    desc: &'a ToolDescriptor,
    call: &ToolCall,
    store: &Scratchpad,
    view: &PathView,
    env: &'a ToolEnv,
) -> Result<ToolArgs<'a>, ToolFailure> {
    let name = &desc.name;
    for k in call.bindings.keys() {
        match desc.param(k) {
            Some(p) if p.is_binding() => {}
            Some(_) => {
                return Err(ToolFailure::type_error(format!(
                    "{name}() argument '{k}' is a literal; pass it in `func_kwargs`, not `bindings`"
                )))
            }
            None => return Err(ToolFailure::type_error(format!("{name}() got an unexpected keyword argument '{k}'"))),
        }
    }
    for k in call.func_kwargs.keys() {
        match desc.param(k) {
            Some(p) if !p.is_binding() => {}
            Some(_) => {
                return Err(ToolFailure::type_error(format!(
                    "{name}() argument '{k}' must be passed through `bindings` as a scratchpad key"
                )))
            }
            None => return Err(ToolFailure::type_error(format!("{name}() got an unexpected keyword argument '{k}'"))),
        }
    }
    let missing: Vec<&str> = desc
        .params
        .iter()
        .filter(|p| {
            p.required
                && if p.is_binding() {
                    !call.bindings.contains_key(&p.name)
                } else {
                    call.func_kwargs.get(&p.name).is_none_or(Value::is_null)
                }
        })
        .map(|p| p.name.as_str())
        .collect();
    if !missing.is_empty() {
        let plural = if missing.len() == 1 { "argument" } else { "arguments" };
        return Err(ToolFailure::new(
            ErrorKind::MissingRequiredArg,
            "TypeError",
            format!("{name}() missing {} required positional {plural}: {}", missing.len(), python_arg_list(&missing)),
        ));
    }
    if desc.wrapper.output_required() && call.output.as_deref().is_none_or(str::is_empty) {
        return Err(ToolFailure::new(
            ErrorKind::MissingRequiredArg,
            "TypeError",
            format!("{name}() missing the scratchpad key for its result: set `output`"),
        ));
    }

    let mut bound = BTreeMap::new();
    for p in &desc.params {
        let ParamSource::Binding(kinds) = &p.source else { continue };
        let Some(key) = call.bindings.get(&p.name) else { continue };
        let entry = store.resolve(view, key).map_err(|e| match e {
            ScratchpadError::NameNotFound { name, available } => ToolFailure::new(
                ErrorKind::BindingUnresolved,
                "KeyError",
                format!("Key '{name}' not found in scratchpad. Available keys: [{}]", quoted_list(&available)),
            ),
            other => ToolFailure::new(ErrorKind::BindingUnresolved, "KeyError", other.to_string()),
        })?;
        if !kinds.contains(&entry.kind) {
            let accepted: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
            return Err(ToolFailure::new(
                ErrorKind::KindMismatch,
                "TypeError",
                format!(
                    "{name}() argument '{}' expects a {} but scratchpad key '{key}' holds a {}",
                    p.name,
                    accepted.join(" or "),
                    entry.kind
                ),
            ));
        }
        bound.insert(p.name.clone(), entry.value.clone());
    }

    let mut kwargs = Map::new();
    for p in &desc.params {
        let ParamSource::Literal(kind) = p.source else { continue };
        match call.func_kwargs.get(&p.name) {
            Some(v) if !v.is_null() => {
                if !kind.accepts(v) {
                    return Err(ToolFailure::type_error(format!(
                        "{name}() argument '{}' must be {}, got {v}",
                        p.name,
                        kind.describe()
                    )));
                }
                kwargs.insert(p.name.clone(), v.clone());
            }
            _ => {
                if let Some(d) = &p.default {
                    kwargs.insert(p.name.clone(), d.clone());
                }
            }
        }
    }
    Ok(ToolArgs { desc, bound, kwargs, env })
}

fn quoted_list(names: &[String]) -> String {
    names.iter().map(|n| format!("'{n}'")).collect::<Vec<_>>().join(", ")
}

fn write_outputs(
    desc: &ToolDescriptor,
    call: &ToolCall,
    out: ToolOutput,
    child_pad: &mut NodePad,
) -> Result<ToolResult, ToolFailure> {
    let primary_name: Option<String> = match desc.wrapper {
        WrapperKind::Get => None,
        WrapperKind::Set | WrapperKind::GetSet => call.output.clone(),
        WrapperKind::Override => call.output.clone().filter(|o| !o.is_empty()).or_else(|| {
            desc.params
                .iter()
                .find(|p| p.is_binding())
                .and_then(|p| call.bindings.get(&p.name).cloned())
        }),
    };
    let extra_names: BTreeSet<&str> = out.extra.iter().map(|(n, _)| n.as_str()).collect();
    let mut writes: Vec<(String, Artifact)> = Vec::new();
    if let (Some(n), Some(v)) = (&primary_name, &out.value) {
        if !extra_names.contains(n.as_str()) {
            writes.push((n.clone(), v.clone()));
        }
    }
    writes.extend(out.extra.iter().cloned());
    if desc.wrapper != WrapperKind::Get && writes.is_empty() {
        return Err(ToolFailure::new(
            ErrorKind::ToolRuntimeError,
            "RuntimeError",
            format!("{}() produced no result", desc.name),
        ));
    }
    let mut pad = NodePad::new();
    for (n, v) in &writes {
        pad.put(n, v.clone(), &call.call_id).map_err(|e| {
            ToolFailure::new(ErrorKind::InvalidArgument, "ValueError", e.to_string())
        })?;
    }
    for e in pad.entries() {
        child_pad.put(&e.name, e.value.clone(), &e.created_by).map_err(|e| {
            ToolFailure::new(ErrorKind::InvalidArgument, "ValueError", e.to_string())
        })?;
    }
    let created: Vec<(String, ObjectKind)> = writes.iter().map(|(n, v)| (n.clone(), v.kind())).collect();
    let message = success_message(desc, call, &out.text, &created);
    Ok(ToolResult { ok: true, message, created, error_kind: None, io: out.io })
}

fn success_message(desc: &ToolDescriptor, call: &ToolCall, text: &str, created: &[(String, ObjectKind)]) -> String {
    let mut s = format!("Applied {} with docstring: \n{}\n", desc.name, indent_doc(&desc.docstring));
    if !text.is_empty() {
        s.push('\n');
        s.push_str(text);
        s.push('\n');
    }
    s.push_str(&format!(
        "\nThe mapping between the function parameters and the scratchpad keys is {}.",
        py_str_dict(call.bindings.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    ));
    if !created.is_empty() {
        s.push_str(&format!(
            " The results were saved to the scratchpad as {}.",
            py_str_dict(created.iter().map(|(n, k)| (n.as_str(), k.as_str())))
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repr_matches_python() {
        assert_eq!(py_repr("Input y contains NaN."), "'Input y contains NaN.'");
        assert_eq!(
            py_repr("read_data() missing 1 required positional argument: 'filepath'"),
            "\"read_data() missing 1 required positional argument: 'filepath'\""
        );
        assert_eq!(py_repr("a'b\"c"), "'a\\'b\"c'");
        assert_eq!(py_repr("x\ny"), "'x\\ny'");
    }

    #[test]
    fn python_argument_lists() {
        assert_eq!(python_arg_list(&["a"]), "'a'");
        assert_eq!(python_arg_list(&["a", "b"]), "'a' and 'b'");
        assert_eq!(python_arg_list(&["a", "b", "c"]), "'a', 'b', and 'c'");
    }

    #[test]
    fn catalog_parses() {
        let descs = parse_catalog(CATALOG_TOML).unwrap();
        assert_eq!(descs.len(), 61);
        let names: BTreeSet<&str> = descs.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names.len(), 61);
        for d in &descs {
            let reads = d.params.iter().any(ParamSpec::is_binding);
            match d.wrapper {
                WrapperKind::Set => assert!(!reads, "{}", d.name),
                _ => assert!(reads, "{}", d.name),
            }
            assert!(d.name.starts_with("tune_") == d.grid.is_some(), "{}", d.name);
        }
    }
}
