//! Identifiers shared by every analysis stage.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A position in a source unit. `eval_depth` is 0 for the program text and
/// grows by one for every level of dynamically evaluated code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceLoc {
    pub unit: String,
    pub line: u32,
    pub col: u32,
    #[serde(default)]
    pub eval_depth: u32,
}

impl SourceLoc {
    pub fn new(unit: impl Into<String>, line: u32, col: u32, eval_depth: u32) -> Self {
        SourceLoc {
            unit: unit.into(),
            line,
            col,
            eval_depth,
        }
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.unit, self.line, self.col)?;
        if self.eval_depth > 0 {
            write!(f, "#{}", self.eval_depth)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SourceLoc {
    type Err = String;

    /// Parses the `Display` form `unit:line:col` with an optional `#depth`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, ':');
        let (Some(tail), Some(line), Some(unit)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("bad location `{s}`"));
        };
        let (col, depth) = match tail.split_once('#') {
            Some((c, d)) => (c, d.parse().map_err(|_| format!("bad eval depth in `{s}`"))?),
            None => (tail, 0),
        };
        Ok(SourceLoc {
            unit: unit.to_string(),
            line: line.parse().map_err(|_| format!("bad line in `{s}`"))?,
            col: col.parse().map_err(|_| format!("bad column in `{s}`"))?,
            eval_depth: depth,
        })
    }
}

/// Stable identifier of a function definition: `name@line:col` for the
/// program unit and `name@unit:line:col` for dynamically evaluated units.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(pub String);

impl FunctionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The declared name portion (`anon` for anonymous literals).
    pub fn name(&self) -> &str {
        self.0.split('@').next().unwrap_or("")
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Either a user function or a native from the registry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FuncRef {
    User(FunctionId),
    Native(String),
}

const NATIVE_PREFIX: &str = "native:";

impl FuncRef {
    pub fn is_native(&self) -> bool {
        matches!(self, FuncRef::Native(_))
    }

    pub fn user(&self) -> Option<&FunctionId> {
        match self {
            FuncRef::User(id) => Some(id),
            FuncRef::Native(_) => None,
        }
    }

    /// Declared name of a user function, or the native's name.
    pub fn name(&self) -> &str {
        match self {
            FuncRef::User(id) => id.name(),
            FuncRef::Native(n) => n,
        }
    }

    pub fn parse(s: &str) -> FuncRef {
        match s.strip_prefix(NATIVE_PREFIX) {
            Some(name) => FuncRef::Native(name.to_string()),
            None => FuncRef::User(FunctionId(s.to_string())),
        }
    }
}

impl fmt::Display for FuncRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncRef::User(id) => f.write_str(id.as_str()),
            FuncRef::Native(n) => write!(f, "{NATIVE_PREFIX}{n}"),
        }
    }
}

impl Serialize for FuncRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FuncRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(FuncRef::parse(&s))
    }
}

/// A lexical variable scope: the program top level or a function body.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScopeId {
    Toplevel(String),
    Func(FunctionId),
}

impl fmt::Display for ScopeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScopeId::Toplevel(unit) => write!(f, "<top:{unit}>"),
            ScopeId::Func(id) => f.write_str(id.as_str()),
        }
    }
}

/// Canonical storage location of a variable, independent of where it is
/// referenced from. Parameters and return values are pseudo-variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarSlot {
    Var { scope: ScopeId, name: String },
    Param { func: FunctionId, index: usize },
    Return { func: FuncRef },
    Global { name: String },
}

impl VarSlot {
    pub fn is_param(&self) -> bool {
        matches!(self, VarSlot::Param { .. })
    }

    pub fn is_return(&self) -> bool {
        matches!(self, VarSlot::Return { .. })
    }
}

impl fmt::Display for VarSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarSlot::Var { scope, name } => write!(f, "var:{scope}/{name}"),
            VarSlot::Param { func, index } => write!(f, "param:{func}/{index}"),
            VarSlot::Return { func } => write!(f, "ret:{func}"),
            VarSlot::Global { name } => write!(f, "global:{name}"),
        }
    }
}

impl std::str::FromStr for VarSlot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("bad slot `{s}`"))?;
        match kind {
            "var" => {
                let (scope, name) = rest
                    .rsplit_once('/')
                    .ok_or_else(|| format!("bad var slot `{s}`"))?;
                let scope = match scope
                    .strip_prefix("<top:")
                    .and_then(|u| u.strip_suffix('>'))
                {
                    Some(unit) => ScopeId::Toplevel(unit.to_string()),
                    None => ScopeId::Func(FunctionId(scope.to_string())),
                };
                Ok(VarSlot::Var {
                    scope,
                    name: name.to_string(),
                })
            }
            "param" => {
                let (func, idx) = rest
                    .rsplit_once('/')
                    .ok_or_else(|| format!("bad param slot `{s}`"))?;
                let index = idx.parse().map_err(|_| format!("bad param index in `{s}`"))?;
                Ok(VarSlot::Param {
                    func: FunctionId(func.to_string()),
                    index,
                })
            }
            "ret" => Ok(VarSlot::Return {
                func: FuncRef::parse(rest),
            }),
            "global" => Ok(VarSlot::Global {
                name: rest.to_string(),
            }),
            _ => Err(format!("unknown slot kind in `{s}`")),
        }
    }
}

impl Serialize for VarSlot {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VarSlot {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The function (or top level, or native) a call executes from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Caller {
    Toplevel,
    Func(FuncRef),
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Caller::Toplevel => f.write_str("toplevel"),
            Caller::Func(r) => r.fmt(f),
        }
    }
}

impl Serialize for Caller {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Caller {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == "toplevel" {
            Caller::Toplevel
        } else {
            Caller::Func(FuncRef::parse(&s))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_strings_parse_back() {
        let slots = [
            VarSlot::Var {
                scope: ScopeId::Toplevel("a".into()),
                name: "x".into(),
            },
            VarSlot::Var {
                scope: ScopeId::Func(FunctionId("main@1:0".into())),
                name: "v1".into(),
            },
            VarSlot::Param {
                func: FunctionId("foo@1:0".into()),
                index: 1,
            },
            VarSlot::Return {
                func: FuncRef::Native("identity".into()),
            },
            VarSlot::Global {
                name: "evalCode".into(),
            },
        ];
        for slot in slots {
            assert_eq!(slot.to_string().parse::<VarSlot>().unwrap(), slot);
        }
    }

    #[test]
    fn location_text_parses_back() {
        for loc in [SourceLoc::new("a:b", 3, 0, 0), SourceLoc::new("u>evalCode#1", 1, 9, 2)] {
            assert_eq!(loc.to_string().parse::<SourceLoc>().unwrap(), loc);
        }
        assert!("nope".parse::<SourceLoc>().is_err());
    }

    #[test]
    fn function_id_name() {
        assert_eq!(FunctionId("f1@2:11".into()).name(), "f1");
        assert_eq!(FuncRef::parse("native:call"), FuncRef::Native("call".into()));
    }
}
