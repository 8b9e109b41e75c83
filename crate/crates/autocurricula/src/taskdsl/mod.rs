//! Environment-state task language.
//!
//! A task is an ordered sequence of environment states; each state lists, per
//! object, the attribute values that must hold simultaneously. Completion
//! means achieving the states in order. Task text uses the bracketed
//! `obj_attributes("Name", {"attr": value, ...})` form; parsing is lenient
//! about spacing and accepts a braceless single-pair dict, while serialization
//! is canonical (sorted attribute and object names, fixed spacing) so that
//! equal tasks map to equal text.

mod generator;
mod parser;

pub use generator::{
    random_task, AffordanceFlag, AffordanceTable, GenerationLimits, KITCHEN_AFFORDANCES_TEXT,
};
pub use parser::parse_task;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard ceiling on environment states per task.
pub const MAX_TASK_STATES: usize = 10;

/// Opaque, ordered task identifier. For DSL tasks this is the canonical task
/// text; benchmark worlds use plain names like `collect wood`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId::new(s)
    }
}

/// Object temperature levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Temperature {
    Hot,
    Cold,
    RoomTemp,
}

impl Temperature {
    pub fn as_str(self) -> &'static str {
        match self {
            Temperature::Hot => "Hot",
            Temperature::Cold => "Cold",
            Temperature::RoomTemp => "RoomTemp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "Hot" => Some(Temperature::Hot),
            "Cold" => Some(Temperature::Cold),
            "RoomTemp" => Some(Temperature::RoomTemp),
            _ => None,
        }
    }
}

/// The attribute vocabulary objects can be constrained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    Visible,
    IsToggled,
    IsBroken,
    IsFilledWithLiquid,
    IsDirty,
    IsCooked,
    Temperature,
    IsSliced,
    IsOpen,
    IsPickedUp,
    ReceptacleObjects,
}

/// Value shape an attribute takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Bool,
    Temperature,
    Objects,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Visible,
        Attribute::IsToggled,
        Attribute::IsBroken,
        Attribute::IsFilledWithLiquid,
        Attribute::IsDirty,
        Attribute::IsCooked,
        Attribute::Temperature,
        Attribute::IsSliced,
        Attribute::IsOpen,
        Attribute::IsPickedUp,
        Attribute::ReceptacleObjects,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Visible => "visible",
            Attribute::IsToggled => "isToggled",
            Attribute::IsBroken => "isBroken",
            Attribute::IsFilledWithLiquid => "isFilledWithLiquid",
            Attribute::IsDirty => "isDirty",
            Attribute::IsCooked => "isCooked",
            Attribute::Temperature => "temperature",
            Attribute::IsSliced => "isSliced",
            Attribute::IsOpen => "isOpen",
            Attribute::IsPickedUp => "isPickedUp",
            Attribute::ReceptacleObjects => "receptacleObjects",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Attribute::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn kind(self) -> AttributeKind {
        match self {
            Attribute::Temperature => AttributeKind::Temperature,
            Attribute::ReceptacleObjects => AttributeKind::Objects,
            _ => AttributeKind::Bool,
        }
    }
}

/// A concrete attribute value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeValue {
    Bool(bool),
    Temperature(Temperature),
    /// Objects a receptacle must contain (superset match: the snapshot may
    /// hold more).
    Objects(BTreeSet<String>),
}

impl AttributeValue {
    pub fn kind(&self) -> AttributeKind {
        match self {
            AttributeValue::Bool(_) => AttributeKind::Bool,
            AttributeValue::Temperature(_) => AttributeKind::Temperature,
            AttributeValue::Objects(_) => AttributeKind::Objects,
        }
    }
}

/// One `attribute: value` constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRequirement {
    attribute: Attribute,
    value: AttributeValue,
}

impl AttributeRequirement {
    pub fn new(attribute: Attribute, value: AttributeValue) -> Result<Self> {
        if attribute.kind() != value.kind() {
            return Err(Error::Generation(format!(
                "attribute {} takes a {:?} value, got {:?}",
                attribute.name(),
                attribute.kind(),
                value.kind()
            )));
        }
        if let AttributeValue::Objects(objs) = &value {
            if objs.is_empty() {
                return Err(Error::Generation(
                    "receptacleObjects needs at least one contained object".into(),
                ));
            }
            if objs.iter().any(|o| o.is_empty()) {
                return Err(Error::Generation("contained object names must be non-empty".into()));
            }
        }
        Ok(AttributeRequirement { attribute, value })
    }

    pub fn bool(attribute: Attribute, v: bool) -> Result<Self> {
        Self::new(attribute, AttributeValue::Bool(v))
    }

    pub fn attribute(&self) -> Attribute {
        self.attribute
    }

    pub fn value(&self) -> &AttributeValue {
        &self.value
    }
}

/// All constraints on a single object within one environment state.
/// Requirements are kept sorted by attribute name; duplicates are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRequirement {
    object: String,
    requirements: Vec<AttributeRequirement>,
}

impl ObjectRequirement {
    pub fn new(object: impl Into<String>, mut requirements: Vec<AttributeRequirement>) -> Result<Self> {
        let object = object.into();
        if object.is_empty() {
            return Err(Error::Generation("object name must be non-empty".into()));
        }
        if requirements.is_empty() {
            return Err(Error::Generation(format!(
                "object {object} needs at least one attribute requirement"
            )));
        }
        requirements.sort_by_key(|r| r.attribute().name());
        for pair in requirements.windows(2) {
            if pair[0].attribute() == pair[1].attribute() {
                return Err(Error::Generation(format!(
                    "object {object} lists attribute {} twice",
                    pair[0].attribute().name()
                )));
            }
        }
        Ok(ObjectRequirement { object, requirements })
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    pub fn requirements(&self) -> &[AttributeRequirement] {
        &self.requirements
    }
}

/// One environment state: object requirements that must hold simultaneously.
/// Objects are kept sorted by name; duplicates are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvStateSpec {
    objects: Vec<ObjectRequirement>,
}

impl EnvStateSpec {
    pub fn new(mut objects: Vec<ObjectRequirement>) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Generation("environment state needs at least one object".into()));
        }
        objects.sort_by(|a, b| a.object().cmp(b.object()));
        for pair in objects.windows(2) {
            if pair[0].object() == pair[1].object() {
                return Err(Error::Generation(format!(
                    "state lists object {} twice",
                    pair[0].object()
                )));
            }
        }
        Ok(EnvStateSpec { objects })
    }

    pub fn objects(&self) -> &[ObjectRequirement] {
        &self.objects
    }
}

/// A task: environment states to achieve in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    states: Vec<EnvStateSpec>,
}

impl TaskSpec {
    pub fn new(states: Vec<EnvStateSpec>) -> Result<Self> {
        if states.is_empty() || states.len() > MAX_TASK_STATES {
            return Err(Error::Generation(format!(
                "task must have between 1 and {MAX_TASK_STATES} states, got {}",
                states.len()
            )));
        }
        Ok(TaskSpec { states })
    }

    pub fn states(&self) -> &[EnvStateSpec] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// How object names feed into task identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Abstraction {
    /// Identity keeps concrete object names.
    #[default]
    None,
    /// Object names collapse to a placeholder, so tasks differing only in
    /// which object they touch share an id.
    ObjectType,
}

fn push_value(out: &mut String, value: &AttributeValue) {
    match value {
        AttributeValue::Bool(true) => out.push_str("True"),
        AttributeValue::Bool(false) => out.push_str("False"),
        AttributeValue::Temperature(t) => {
            out.push('"');
            out.push_str(t.as_str());
            out.push('"');
        }
        AttributeValue::Objects(objs) => {
            if objs.len() == 1 {
                out.push('"');
                out.push_str(objs.iter().next().expect("non-empty by construction"));
                out.push('"');
            } else {
                out.push('[');
                for (i, o) in objs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push('"');
                    out.push_str(o);
                    out.push('"');
                }
                out.push(']');
            }
        }
    }
}

fn push_object(out: &mut String, req: &ObjectRequirement, abstraction: Abstraction) {
    out.push_str("obj_attributes(\"");
    match abstraction {
        Abstraction::None => out.push_str(req.object()),
        Abstraction::ObjectType => out.push_str("<object>"),
    }
    out.push_str("\", {");
    for (i, r) in req.requirements().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('"');
        out.push_str(r.attribute().name());
        out.push_str("\": ");
        push_value(out, r.value());
    }
    out.push_str("})");
}

fn serialize_with(spec: &TaskSpec, abstraction: Abstraction) -> String {
    let mut out = String::new();
    out.push('[');
    for (i, state) in spec.states().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for (j, obj) in state.objects().iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            push_object(&mut out, obj, abstraction);
        }
        out.push(']');
    }
    out.push(']');
    out
}

/// Canonical task text: sorted attribute and object names, fixed spacing,
/// booleans as `True`/`False`, one-element receptacle contents as a bare
/// string. `parse_task(serialize_task(s))` is structurally equal to `s`, and
/// re-serializing is byte-identical.
pub fn serialize_task(spec: &TaskSpec) -> String {
    serialize_with(spec, Abstraction::None)
}

/// Stable identifier for a task: its canonical text, optionally with object
/// names collapsed to a placeholder.
pub fn canonicalize(spec: &TaskSpec, abstraction: Abstraction) -> TaskId {
    TaskId::new(serialize_with(spec, abstraction))
}

/// Attribute values of one concrete object in the world. Unspecified
/// attributes take their defaults: booleans false, temperature `RoomTemp`,
/// receptacle contents empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectState {
    values: BTreeMap<Attribute, AttributeValue>,
}

impl ObjectState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set one attribute value, checking kind agreement.
    pub fn set(&mut self, attribute: Attribute, value: AttributeValue) -> Result<()> {
        if attribute.kind() != value.kind() {
            return Err(Error::Evaluation(format!(
                "attribute {} takes a {:?} value, got {:?}",
                attribute.name(),
                attribute.kind(),
                value.kind()
            )));
        }
        self.values.insert(attribute, value);
        Ok(())
    }

    pub fn with(mut self, attribute: Attribute, value: AttributeValue) -> Result<Self> {
        self.set(attribute, value)?;
        Ok(self)
    }

    /// Value for an attribute, falling back to the attribute's default.
    pub fn get(&self, attribute: Attribute) -> AttributeValue {
        self.values.get(&attribute).cloned().unwrap_or_else(|| match attribute.kind() {
            AttributeKind::Bool => AttributeValue::Bool(false),
            AttributeKind::Temperature => AttributeValue::Temperature(Temperature::RoomTemp),
            AttributeKind::Objects => AttributeValue::Objects(BTreeSet::new()),
        })
    }
}

/// Everything the checker can see about the world at one instant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldSnapshot {
    objects: BTreeMap<String, ObjectState>,
}

impl WorldSnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_object(&mut self, name: impl Into<String>, state: ObjectState) {
        self.objects.insert(name.into(), state);
    }

    pub fn with_object(mut self, name: impl Into<String>, state: ObjectState) -> Self {
        self.insert_object(name, state);
        self
    }

    pub fn object(&self, name: &str) -> Option<&ObjectState> {
        self.objects.get(name)
    }

    pub fn object_mut(&mut self, name: &str) -> Option<&mut ObjectState> {
        self.objects.get_mut(name)
    }
}

/// Whether one object's requirements all hold in the snapshot. The object
/// itself must exist in the snapshot; a missing object is an error, not a
/// failed match.
pub fn requirement_satisfied(snapshot: &WorldSnapshot, req: &ObjectRequirement) -> Result<bool> {
    let state = snapshot
        .object(req.object())
        .ok_or_else(|| Error::Evaluation(format!("snapshot has no object named {}", req.object())))?;
    for r in req.requirements() {
        let actual = state.get(r.attribute());
        let holds = match (r.value(), &actual) {
            (AttributeValue::Bool(want), AttributeValue::Bool(is)) => want == is,
            (AttributeValue::Temperature(want), AttributeValue::Temperature(is)) => want == is,
            (AttributeValue::Objects(want), AttributeValue::Objects(is)) => want.is_subset(is),
            // `get` returns a value of the attribute's own kind, so shapes
            // always line up.
            _ => unreachable!("snapshot value kind matches attribute kind"),
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether every object requirement of a state holds simultaneously.
pub fn state_satisfied(snapshot: &WorldSnapshot, state: &EnvStateSpec) -> Result<bool> {
    for obj in state.objects() {
        if !requirement_satisfied(snapshot, obj)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Cursor into a task's state sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaskProgress {
    next_index: usize,
}

impl TaskProgress {
    pub fn start() -> Self {
        Self::default()
    }

    pub fn next_index(&self) -> usize {
        self.next_index
    }

    pub fn is_complete(&self, task: &TaskSpec) -> bool {
        self.next_index >= task.len()
    }
}

/// Advance progress by at most one state: if the next pending state holds in
/// the snapshot, the cursor moves past it. Later states satisfied "early"
/// do not count until their turn.
pub fn advance_progress(
    progress: TaskProgress,
    task: &TaskSpec,
    snapshot: &WorldSnapshot,
) -> Result<TaskProgress> {
    if progress.is_complete(task) {
        return Ok(progress);
    }
    if state_satisfied(snapshot, &task.states()[progress.next_index])? {
        return Ok(TaskProgress { next_index: progress.next_index + 1 });
    }
    Ok(progress)
}

/// One stored task: canonical spec plus an optional natural-language label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveLine {
    pub spec: TaskSpec,
    pub natural_language: Option<String>,
}

/// Render archive lines: one canonical task per line, with the label after a
/// tab when present.
pub fn write_archive(lines: &[ArchiveLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serialize_task(&line.spec));
        if let Some(nl) = &line.natural_language {
            out.push('\t');
            out.push_str(nl);
        }
        out.push('\n');
    }
    out
}

/// Parse an archive produced by [`write_archive`]. Blank lines are skipped.
pub fn read_archive(text: &str) -> Result<Vec<ArchiveLine>> {
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (code, nl) = match line.split_once('\t') {
            Some((code, nl)) => (code, Some(nl.to_string())),
            None => (line, None),
        };
        out.push(ArchiveLine { spec: parse_task(code)?, natural_language: nl });
    }
    Ok(out)
}
