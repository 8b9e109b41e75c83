//! Task generation against an object-capability table.
//!
//! Random tasks are only useful if an agent could in principle complete them,
//! so sampling is gated on per-object capability flags: a generated
//! requirement is kept only when [`AffordanceTable::requirement_achievable`]
//! accepts it, and the validator applies the same predicate, so generated
//! tasks always validate by construction.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};

use super::{
    Attribute, AttributeKind, AttributeRequirement, AttributeValue, EnvStateSpec,
    ObjectRequirement, TaskSpec, Temperature, MAX_TASK_STATES,
};

/// Capability flags an object can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AffordanceFlag {
    Pickupable,
    Openable,
    Sliceable,
    Toggleable,
    Fillable,
    Receptacle,
    TemperatureMutable,
}

impl AffordanceFlag {
    pub const ALL: [AffordanceFlag; 7] = [
        AffordanceFlag::Pickupable,
        AffordanceFlag::Openable,
        AffordanceFlag::Sliceable,
        AffordanceFlag::Toggleable,
        AffordanceFlag::Fillable,
        AffordanceFlag::Receptacle,
        AffordanceFlag::TemperatureMutable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AffordanceFlag::Pickupable => "pickupable",
            AffordanceFlag::Openable => "openable",
            AffordanceFlag::Sliceable => "sliceable",
            AffordanceFlag::Toggleable => "toggleable",
            AffordanceFlag::Fillable => "fillable",
            AffordanceFlag::Receptacle => "receptacle",
            AffordanceFlag::TemperatureMutable => "temperature-mutable",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        AffordanceFlag::ALL.into_iter().find(|f| f.as_str() == name)
    }
}

/// Bundled capability table for the stock kitchen vocabulary.
pub const KITCHEN_AFFORDANCES_TEXT: &str = include_str!("../../data/kitchen_affordances.txt");

/// Which objects exist and what each can do.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AffordanceTable {
    objects: BTreeMap<String, BTreeSet<AffordanceFlag>>,
}

impl AffordanceTable {
    /// Parse `name: flag,flag,...` lines. `#` starts a comment line; blank
    /// lines are skipped; an empty flag list (`Window:`) is allowed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut objects = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, flags_text) = line.split_once(':').ok_or_else(|| Error::Config(format!(
                "affordance line {} has no ':' separator: {line}",
                idx + 1
            )))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Config(format!("affordance line {} has an empty object name", idx + 1)));
            }
            let mut flags = BTreeSet::new();
            for part in flags_text.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let flag = AffordanceFlag::from_name(part).ok_or_else(|| Error::Config(format!(
                    "affordance line {} names unknown flag '{part}'",
                    idx + 1
                )))?;
                flags.insert(flag);
            }
            if objects.insert(name.to_string(), flags).is_some() {
                return Err(Error::Config(format!("object {name} listed twice in affordance table")));
            }
        }
        if objects.is_empty() {
            return Err(Error::Config("affordance table has no objects".into()));
        }
        Ok(AffordanceTable { objects })
    }

    /// The bundled kitchen vocabulary.
    pub fn kitchen() -> Self {
        AffordanceTable::parse(KITCHEN_AFFORDANCES_TEXT).expect("bundled table parses")
    }

    /// Restrict to a subset of the vocabulary. Unknown names are an error.
    pub fn subset(&self, names: &[&str]) -> Result<Self> {
        let mut objects = BTreeMap::new();
        for name in names {
            let flags = self.objects.get(*name).ok_or_else(|| {
                Error::Config(format!("object {name} not in affordance table"))
            })?;
            objects.insert(name.to_string(), flags.clone());
        }
        if objects.is_empty() {
            return Err(Error::Config("affordance subset is empty".into()));
        }
        Ok(AffordanceTable { objects })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn contains(&self, object: &str) -> bool {
        self.objects.contains_key(object)
    }

    /// Object names in sorted order.
    pub fn object_names(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }

    pub fn has_flag(&self, object: &str, flag: AffordanceFlag) -> bool {
        self.objects.get(object).is_some_and(|flags| flags.contains(&flag))
    }

    /// Whether a requirement on a known object could ever be brought about.
    ///
    /// Rules: `visible` is always achievable (the agent can walk and look);
    /// any boolean required `False` is achievable because it describes a rest
    /// state; a boolean required `True` needs the matching capability flag
    /// (`isBroken`, `isDirty` and `isCooked` need `pickupable` — only objects
    /// an agent can handle get dropped, soiled or cooked); `RoomTemp` is free
    /// while `Hot`/`Cold` need `temperature-mutable`; receptacle contents
    /// need `receptacle` on the container and `pickupable` on every contained
    /// object, which must be a different, known object.
    pub fn requirement_achievable(&self, object: &str, req: &AttributeRequirement) -> bool {
        if !self.contains(object) {
            return false;
        }
        match (req.attribute(), req.value()) {
            (Attribute::Visible, _) => true,
            (_, AttributeValue::Bool(false)) => true,
            (attr, AttributeValue::Bool(true)) => {
                let needed = match attr {
                    Attribute::IsPickedUp => AffordanceFlag::Pickupable,
                    Attribute::IsOpen => AffordanceFlag::Openable,
                    Attribute::IsSliced => AffordanceFlag::Sliceable,
                    Attribute::IsToggled => AffordanceFlag::Toggleable,
                    Attribute::IsFilledWithLiquid => AffordanceFlag::Fillable,
                    Attribute::IsBroken | Attribute::IsDirty | Attribute::IsCooked => {
                        AffordanceFlag::Pickupable
                    }
                    Attribute::Visible | Attribute::Temperature | Attribute::ReceptacleObjects => {
                        unreachable!("bool value on non-bool attribute")
                    }
                };
                self.has_flag(object, needed)
            }
            (_, AttributeValue::Temperature(Temperature::RoomTemp)) => true,
            (_, AttributeValue::Temperature(_)) => {
                self.has_flag(object, AffordanceFlag::TemperatureMutable)
            }
            (_, AttributeValue::Objects(contents)) => {
                self.has_flag(object, AffordanceFlag::Receptacle)
                    && contents.iter().all(|c| {
                        c != object && self.has_flag(c, AffordanceFlag::Pickupable)
                    })
            }
        }
    }

    /// Check that every object a task names exists and every requirement is
    /// achievable. The first offender is reported.
    pub fn validate_task(&self, task: &TaskSpec) -> Result<()> {
        for (state_idx, state) in task.states().iter().enumerate() {
            for obj in state.objects() {
                if !self.contains(obj.object()) {
                    return Err(Error::Generation(format!(
                        "state {}: unknown object {}",
                        state_idx + 1,
                        obj.object()
                    )));
                }
                for req in obj.requirements() {
                    if let AttributeValue::Objects(contents) = req.value() {
                        for c in contents {
                            if !self.contains(c) {
                                return Err(Error::Generation(format!(
                                    "state {}: {} cannot contain unknown object {c}",
                                    state_idx + 1,
                                    obj.object()
                                )));
                            }
                        }
                    }
                    if !self.requirement_achievable(obj.object(), req) {
                        return Err(Error::Generation(format!(
                            "state {}: requirement {} on {} is not achievable",
                            state_idx + 1,
                            req.attribute().name(),
                            obj.object()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bounds on random task shape.
#[derive(Debug, Clone, Copy)]
pub struct GenerationLimits {
    pub max_states: usize,
    pub max_objects_per_state: usize,
    pub max_attributes_per_object: usize,
    /// Rejection-sampling budget per attribute slot before giving up.
    pub resample_cap: u32,
}

impl Default for GenerationLimits {
    fn default() -> Self {
        GenerationLimits {
            max_states: MAX_TASK_STATES,
            max_objects_per_state: 2,
            max_attributes_per_object: 2,
            resample_cap: 100,
        }
    }
}

impl GenerationLimits {
    fn validate(&self) -> Result<()> {
        if self.max_states == 0 || self.max_states > MAX_TASK_STATES {
            return Err(Error::Config(format!(
                "max_states must be between 1 and {MAX_TASK_STATES}, got {}",
                self.max_states
            )));
        }
        if self.max_objects_per_state == 0 {
            return Err(Error::Config("max_objects_per_state must be at least 1".into()));
        }
        if self.max_attributes_per_object == 0 || self.max_attributes_per_object > Attribute::ALL.len() {
            return Err(Error::Config(format!(
                "max_attributes_per_object must be between 1 and {}, got {}",
                Attribute::ALL.len(),
                self.max_attributes_per_object
            )));
        }
        if self.resample_cap == 0 {
            return Err(Error::Config("resample_cap must be at least 1".into()));
        }
        Ok(())
    }
}

fn random_value<R: Rng + ?Sized>(
    rng: &mut R,
    names: &[&str],
    attribute: Attribute,
) -> AttributeValue {
    match attribute.kind() {
        AttributeKind::Bool => AttributeValue::Bool(rng.random()),
        AttributeKind::Temperature => {
            let t = [Temperature::Hot, Temperature::Cold, Temperature::RoomTemp]
                [rng.random_range(0..3)];
            AttributeValue::Temperature(t)
        }
        AttributeKind::Objects => {
            let count = 1 + usize::from(rng.random::<bool>() && names.len() > 1);
            let mut contents = BTreeSet::new();
            while contents.len() < count {
                contents.insert(names[rng.random_range(0..names.len())].to_string());
            }
            AttributeValue::Objects(contents)
        }
    }
}

fn random_object_requirement<R: Rng + ?Sized>(
    rng: &mut R,
    table: &AffordanceTable,
    names: &[&str],
    object: &str,
    limits: &GenerationLimits,
) -> Result<ObjectRequirement> {
    let n_attrs = rng.random_range(1..=limits.max_attributes_per_object);
    let mut used: BTreeSet<Attribute> = BTreeSet::new();
    let mut requirements = Vec::new();
    for _ in 0..n_attrs {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > limits.resample_cap {
                return Err(Error::Generation(format!(
                    "no achievable requirement found for {object} after {} attempts",
                    limits.resample_cap
                )));
            }
            let attribute = Attribute::ALL[rng.random_range(0..Attribute::ALL.len())];
            if used.contains(&attribute) {
                continue;
            }
            let value = random_value(rng, names, attribute);
            let req = AttributeRequirement::new(attribute, value)?;
            if table.requirement_achievable(object, &req) {
                used.insert(attribute);
                requirements.push(req);
                break;
            }
        }
    }
    ObjectRequirement::new(object, requirements)
}

/// Sample a random task. Every state, object and attribute count is drawn
/// uniformly within `limits`; unachievable requirements are rejected and
/// resampled, so the result always passes [`AffordanceTable::validate_task`].
pub fn random_task<R: Rng + ?Sized>(
    rng: &mut R,
    table: &AffordanceTable,
    limits: &GenerationLimits,
) -> Result<TaskSpec> {
    limits.validate()?;
    let names: Vec<&str> = table.object_names().collect();
    let n_states = rng.random_range(1..=limits.max_states);
    let mut states = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let n_objects = rng.random_range(1..=limits.max_objects_per_state.min(names.len()));
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        while chosen.len() < n_objects {
            chosen.insert(rng.random_range(0..names.len()));
        }
        let objects = chosen
            .into_iter()
            .map(|i| random_object_requirement(rng, table, &names, names[i], limits))
            .collect::<Result<Vec<_>>>()?;
        states.push(EnvStateSpec::new(objects)?);
    }
    let task = TaskSpec::new(states)?;
    debug_assert!(table.validate_task(&task).is_ok());
    Ok(task)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::parse_task;
    use super::*;

    #[test]
    fn bundled_kitchen_table_parses() {
        let table = AffordanceTable::kitchen();
        assert_eq!(table.len(), 43);
        // A fixture with every capability profile: plain surface, handled
        // object, appliance, and a completely inert object.
        assert!(table.has_flag("Fridge", AffordanceFlag::Openable));
        assert!(table.has_flag("Fridge", AffordanceFlag::Receptacle));
        assert!(!table.has_flag("Fridge", AffordanceFlag::Pickupable));
        assert!(table.has_flag("Egg", AffordanceFlag::Pickupable));
        assert!(!table.has_flag("Window", AffordanceFlag::Pickupable));
        assert!(table.contains("Window"));
    }

    #[test]
    fn parse_rejects_malformed_tables() {
        assert!(AffordanceTable::parse("").is_err());
        assert!(AffordanceTable::parse("Apple pickupable").is_err());
        assert!(AffordanceTable::parse("Apple: hoverable").is_err());
        assert!(AffordanceTable::parse("Apple: pickupable\nApple: sliceable").is_err());
        assert!(AffordanceTable::parse(": pickupable").is_err());
    }

    #[test]
    fn visible_and_false_valued_requirements_are_always_achievable() {
        let table = AffordanceTable::kitchen();
        for object in ["Window", "Fridge", "Egg"] {
            let vis = AttributeRequirement::bool(Attribute::Visible, true).unwrap();
            assert!(table.requirement_achievable(object, &vis));
            let not_picked = AttributeRequirement::bool(Attribute::IsPickedUp, false).unwrap();
            assert!(table.requirement_achievable(object, &not_picked));
        }
    }

    #[test]
    fn true_valued_requirements_need_the_matching_flag() {
        let table = AffordanceTable::kitchen();
        let picked = AttributeRequirement::bool(Attribute::IsPickedUp, true).unwrap();
        assert!(table.requirement_achievable("Egg", &picked));
        assert!(!table.requirement_achievable("Fridge", &picked));
        let open = AttributeRequirement::bool(Attribute::IsOpen, true).unwrap();
        assert!(table.requirement_achievable("Fridge", &open));
        assert!(!table.requirement_achievable("Egg", &open));
        let cooked = AttributeRequirement::bool(Attribute::IsCooked, true).unwrap();
        assert!(table.requirement_achievable("Egg", &cooked));
        assert!(!table.requirement_achievable("CounterTop", &cooked));
    }

    #[test]
    fn temperature_requirements_gate_on_mutability() {
        let table = AffordanceTable::kitchen();
        let hot = AttributeRequirement::new(
            Attribute::Temperature,
            AttributeValue::Temperature(Temperature::Hot),
        )
        .unwrap();
        let room = AttributeRequirement::new(
            Attribute::Temperature,
            AttributeValue::Temperature(Temperature::RoomTemp),
        )
        .unwrap();
        assert!(table.requirement_achievable("Egg", &hot));
        assert!(!table.requirement_achievable("Fork", &hot));
        assert!(table.requirement_achievable("Fork", &room));
    }

    #[test]
    fn receptacle_requirements_need_container_and_contents_flags() {
        let table = AffordanceTable::kitchen();
        let contains = |what: &str| {
            AttributeRequirement::new(
                Attribute::ReceptacleObjects,
                AttributeValue::Objects(BTreeSet::from([what.to_string()])),
            )
            .unwrap()
        };
        assert!(table.requirement_achievable("Fridge", &contains("Apple")));
        // Apple is not a receptacle.
        assert!(!table.requirement_achievable("Apple", &contains("Egg")));
        // Cabinet cannot be picked up, so nothing can hold it.
        assert!(!table.requirement_achievable("Fridge", &contains("Cabinet")));
        // Nothing contains itself.
        assert!(!table.requirement_achievable("Fridge", &contains("Fridge")));
    }

    #[test]
    fn validate_accepts_realistic_tasks() {
        let table = AffordanceTable::kitchen();
        let task = parse_task(
            "[[obj_attributes(\"SideTable\", {\"receptacleObjects\": \"Apple\"}), \
              obj_attributes(\"ButterKnife\", {\"isPickedUp\": False})]]",
        )
        .unwrap();
        table.validate_task(&task).unwrap();
    }

    #[test]
    fn validate_rejects_unknown_objects_and_unachievable_requirements() {
        let table = AffordanceTable::kitchen();
        let unknown = parse_task("[[obj_attributes(\"Anvil\", {\"visible\": True})]]").unwrap();
        assert!(table.validate_task(&unknown).is_err());
        let unliftable =
            parse_task("[[obj_attributes(\"Fridge\", {\"isPickedUp\": True})]]").unwrap();
        assert!(table.validate_task(&unliftable).is_err());
        let unknown_content =
            parse_task("[[obj_attributes(\"Fridge\", {\"receptacleObjects\": \"Anvil\"})]]")
                .unwrap();
        assert!(table.validate_task(&unknown_content).is_err());
    }

    #[test]
    fn random_tasks_always_validate() {
        let table = AffordanceTable::kitchen();
        let limits = GenerationLimits::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let task = random_task(&mut rng, &table, &limits).unwrap();
            assert!((1..=MAX_TASK_STATES).contains(&task.len()));
            table.validate_task(&task).unwrap();
        }
    }

    #[test]
    fn random_tasks_are_deterministic_per_seed() {
        let table = AffordanceTable::kitchen();
        let limits = GenerationLimits::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..20).map(|_| random_task(&mut rng, &table, &limits).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn restricted_vocabulary_respects_capabilities() {
        let table = AffordanceTable::kitchen().subset(&["Fridge"]).unwrap();
        let limits = GenerationLimits { max_states: 3, ..GenerationLimits::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let task = random_task(&mut rng, &table, &limits).unwrap();
            table.validate_task(&task).unwrap();
            for state in task.states() {
                for obj in state.objects() {
                    assert_eq!(obj.object(), "Fridge");
                }
            }
        }
        assert!(AffordanceTable::kitchen().subset(&["Anvil"]).is_err());
    }
}
