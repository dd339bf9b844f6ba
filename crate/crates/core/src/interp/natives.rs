use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::SchemaError;

pub const NATIVES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    Pure,
    /// Calls its first argument with the remaining arguments.
    InvokesArgument,
    /// Returns its first argument.
    ReturnsFunction,
    /// `evalCode(code)`: runs code in the caller's scope.
    EvaluatesCode,
    /// `makeFunction(params, body)`: builds a function from strings.
    ConstructsFunction,
    /// `f.bind(thisArg, ...args)`
    Binds,
    /// `f.call(thisArg, ...args)`
    ReflectiveCall,
    /// `f.apply(thisArg, array)`
    ReflectiveApply,
    /// `arrayPush(array, value)`
    StoresElement,
    /// `arrayPop(array)`
    LoadsElement,
}

impl Behavior {
    /// Reflective natives are reached as methods of function values rather
    /// than as global names.
    pub fn is_function_method(self) -> bool {
        matches!(
            self,
            Behavior::Binds | Behavior::ReflectiveCall | Behavior::ReflectiveApply
        )
    }
}

/// Property name used for array elements stored and loaded by the
/// element natives.
pub const ELEMENT_PROP: &str = "[elem]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NativeSpec {
    pub name: String,
    pub modeled: bool,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NativeConfig {
    pub schema_version: u32,
    pub natives: Vec<NativeSpec>,
}

impl NativeConfig {
    pub fn new(natives: Vec<NativeSpec>) -> Result<Self, SchemaError> {
        let cfg = NativeConfig {
            schema_version: NATIVES_SCHEMA_VERSION,
            natives,
        };
        cfg.validate("<natives>")?;
        Ok(cfg)
    }

    fn validate(&self, file: &str) -> Result<(), SchemaError> {
        if self.schema_version != NATIVES_SCHEMA_VERSION {
            return Err(SchemaError::new(
                file,
                "schemaVersion",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        let mut seen = BTreeSet::new();
        for n in &self.natives {
            if !seen.insert(n.name.as_str()) {
                return Err(SchemaError::new(
                    file,
                    "natives.name",
                    format!("duplicate native `{}`", n.name),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self, SchemaError> {
        let cfg: NativeConfig =
            serde_json::from_str(text).map_err(|e| SchemaError::new(file, "natives", e.to_string()))?;
        cfg.validate(file)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn get(&self, name: &str) -> Option<&NativeSpec> {
        self.natives.iter().find(|n| n.name == name)
    }

    pub fn is_modeled(&self, name: &str) -> bool {
        self.get(name).is_some_and(|n| n.modeled)
    }

    /// Natives bound as global variables.
    pub fn global_names(&self) -> BTreeSet<String> {
        self.natives
            .iter()
            .filter(|n| !n.behavior.is_function_method())
            .map(|n| n.name.clone())
            .collect()
    }

    /// The native reached as method `name` of a function value.
    pub fn function_method(&self, name: &str) -> Option<&NativeSpec> {
        self.natives
            .iter()
            .find(|n| n.behavior.is_function_method() && n.name == name)
    }
}

impl Default for NativeConfig {
    fn default() -> Self {
        use Behavior::*;
        let spec = |name: &str, modeled, behavior| NativeSpec {
            name: name.to_string(),
            modeled,
            behavior,
        };
        NativeConfig {
            schema_version: NATIVES_SCHEMA_VERSION,
            natives: vec![
                spec("evalCode", true, EvaluatesCode),
                spec("makeFunction", true, ConstructsFunction),
                spec("call", true, ReflectiveCall),
                spec("apply", true, ReflectiveApply),
                spec("bind", true, Binds),
                spec("runCallback", true, InvokesArgument),
                spec("invokeCallback", false, InvokesArgument),
                spec("identity", true, ReturnsFunction),
                spec("opaqueIdentity", false, ReturnsFunction),
                spec("arrayPush", true, StoresElement),
                spec("arrayPop", true, LoadsElement),
                spec("print", true, Pure),
                spec("random", true, Pure),
            ],
        }
    }
}
