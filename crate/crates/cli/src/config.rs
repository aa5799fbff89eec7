//! JSON configuration: bases, kernels, grids and the resolved run
//! configuration embedded in every report.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use sdfields_core::expr::Expr;
use sdfields_core::integrated_fields::IntegratorMeasure;
use sdfields_core::kernel::{ContinuityClass, KernelFamily, KernelSpec};
use sdfields_core::levy_core::{Atom, ControlMeasure, LevyMeasure1D, LevyQuadruplet, ParamFn, Rect, RhoField, Side};
use sdfields_core::volterra_sim::SimGrid;
use sdfields_core::Error;

/// Seed used when neither the config, the flag nor `SDFIELDS_SEED` set one.
pub const DEFAULT_SEED: u64 = 271_828_182_845;

pub fn parse_error(msg: impl Into<String>) -> Error {
    Error::ConfigParse(msg.into())
}

/// A real number that may be infinite; written as `"inf"` or `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Bound;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Bound, E> {
                Ok(Bound(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Bound, E> {
                Ok(Bound(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Bound, E> {
                Ok(Bound(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Bound, E> {
                match v {
                    "inf" | "+inf" | "infinity" => Ok(Bound(f64::INFINITY)),
                    "-inf" | "-infinity" => Ok(Bound(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn line() -> [Bound; 2] {
    [Bound(f64::NEG_INFINITY), Bound(f64::INFINITY)]
}

/// A constant or an expression string in `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrExpr {
    Num(f64),
    Expr(String),
}

impl Default for NumOrExpr {
    fn default() -> Self {
        NumOrExpr::Num(0.0)
    }
}

impl NumOrExpr {
    fn resolve(&self, field: &str) -> Result<ParamFn, Error> {
        match self {
            NumOrExpr::Num(v) => Ok(ParamFn::Const(*v)),
            NumOrExpr::Expr(src) => Ok(ParamFn::Expr(expr(src, field)?)),
        }
    }
}

fn expr(src: &str, field: &str) -> Result<Expr, Error> {
    Expr::parse(src).map_err(|e| parse_error(format!("field `{field}`: {e}")))
}

fn one() -> f64 {
    1.0
}

fn unit_density() -> NumOrExpr {
    NumOrExpr::Num(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default = "line")]
    pub domain: [Bound; 2],
    #[serde(default = "unit_density")]
    pub density: NumOrExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideConfig {
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub location: f64,
    pub mass: f64,
}

/// A Lévy basis: a named family or a custom quadruplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisFamily {
    Gaussian {
        #[serde(default = "one")]
        b: f64,
        #[serde(default)]
        gamma: f64,
    },
    Poisson {
        lambda: f64,
        #[serde(default = "one")]
        jump: f64,
        #[serde(default)]
        compensated: bool,
    },
    CompoundPoisson {
        lambda: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        centered: bool,
    },
    Gamma {
        #[serde(default = "one")]
        shape: f64,
        #[serde(default = "one")]
        rate: f64,
    },
    TemperedStable {
        c: f64,
        beta: f64,
        lambda: f64,
        #[serde(default = "both")]
        side: SideConfig,
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        b: f64,
    },
    Custom {
        #[serde(default)]
        gamma: NumOrExpr,
        #[serde(default)]
        b: NumOrExpr,
        /// Density in `x` and `s`.
        #[serde(default)]
        density: Option<String>,
        #[serde(default = "line")]
        support: [Bound; 2],
        #[serde(default)]
        atoms: Vec<AtomConfig>,
    },
}

fn both() -> SideConfig {
    SideConfig::Both
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisConfig {
    #[serde(flatten)]
    pub family: BasisFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
}

/// Splits the shared key `extra` off an object so that the family part can
/// reject unknown fields.
fn split_key<'de, D: Deserializer<'de>>(d: D, extra: &str) -> Result<(serde_json::Value, Option<serde_json::Value>), D::Error> {
    let mut v = serde_json::Value::deserialize(d)?;
    let taken = v.as_object_mut().and_then(|m| m.remove(extra));
    Ok((v, taken))
}

impl<'de> Deserialize<'de> for BasisConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (rest, control) = split_key(d, "control")?;
        let control = control
            .map(|c| serde_json::from_value(c).map_err(|e| de::Error::custom(format!("control: {e}"))))
            .transpose()?;
        let family = serde_json::from_value(rest).map_err(de::Error::custom)?;
        Ok(Self { family, control })
    }
}

impl BasisConfig {
    pub fn resolve(&self) -> Result<LevyQuadruplet, Error> {
        let q = match &self.family {
            BasisFamily::Gaussian { b, gamma } => LevyQuadruplet::gaussian(*b, *gamma),
            BasisFamily::Poisson {
                lambda,
                jump,
                compensated,
            } => LevyQuadruplet::poisson(*lambda, *jump, *compensated),
            BasisFamily::CompoundPoisson { lambda, rate, centered } => {
                LevyQuadruplet::compound_poisson_exp(*lambda, *rate, *centered)
            }
            BasisFamily::Gamma { shape, rate } => LevyQuadruplet::gamma_subordinator(*shape, *rate),
            BasisFamily::TemperedStable {
                c,
                beta,
                lambda,
                side,
                gamma,
                b,
            } => {
                let side = match side {
                    SideConfig::Positive => Side::Positive,
                    SideConfig::Negative => Side::Negative,
                    SideConfig::Both => Side::Both,
                };
                LevyQuadruplet::new(
                    (*gamma).into(),
                    (*b).into(),
                    RhoField::Fixed(LevyMeasure1D::tempered_stable(*c, *beta, *lambda, side)),
                    ControlMeasure::lebesgue_line(),
                )?
            }
            BasisFamily::Custom {
                gamma,
                b,
                density,
                support,
                atoms,
            } => {
                let atoms: Vec<Atom> = atoms
                    .iter()
                    .map(|a| Atom {
                        location: a.location,
                        mass: a.mass,
                    })
                    .collect();
                let rho = match density {
                    Some(src) => RhoField::Custom {
                        density: expr(src, "density")?,
                        lo: support[0].0,
                        hi: support[1].0,
                        atoms,
                    },
                    None => RhoField::Fixed(LevyMeasure1D {
                        densities: Vec::new(),
                        atoms,
                    }),
                };
                LevyQuadruplet::new(gamma.resolve("gamma")?, b.resolve("b")?, rho, ControlMeasure::lebesgue_line())?
            }
        };
        let q = match &self.control {
            Some(c) => q.with_control(ControlMeasure {
                domain: Rect::interval(c.domain[0].0, c.domain[1].0),
                density: c.density.resolve("control.density")?,
            })?,
            None => q,
        };
        q.validate()?;
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityConfig {
    Lower,
    Upper,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamilyConfig {
    Zero,
    Ou,
    Gamma {
        alpha: f64,
    },
    Fractional {
        alpha: f64,
    },
    /// Expression in `u` and `s`; a stationary kernel is read as `g(u − s)`.
    Custom {
        expr: String,
        #[serde(default)]
        stationary: bool,
        #[serde(default = "neither")]
        continuity: ContinuityConfig,
        #[serde(default)]
        breaks: Vec<f64>,
        #[serde(default)]
        singular: Vec<f64>,
    },
}

fn neither() -> ContinuityConfig {
    ContinuityConfig::Neither
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConfig {
    #[serde(flatten)]
    pub family: KernelFamilyConfig,
    pub scale: f64,
}

impl<'de> Deserialize<'de> for KernelConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (rest, scale) = split_key(d, "scale")?;
        let scale = match scale {
            Some(v) => v.as_f64().ok_or_else(|| de::Error::custom("scale must be a number"))?,
            None => 1.0,
        };
        let family = serde_json::from_value(rest).map_err(de::Error::custom)?;
        Ok(Self { family, scale })
    }
}

impl KernelConfig {
    pub fn resolve(&self) -> Result<KernelSpec, Error> {
        let family = match &self.family {
            KernelFamilyConfig::Zero => KernelFamily::Zero,
            KernelFamilyConfig::Ou => KernelFamily::Ou,
            KernelFamilyConfig::Gamma { alpha } => KernelFamily::Gamma { alpha: *alpha },
            KernelFamilyConfig::Fractional { alpha } => KernelFamily::Fractional { alpha: *alpha },
            KernelFamilyConfig::Custom {
                expr: src,
                stationary,
                continuity,
                breaks,
                singular,
            } => KernelFamily::Custom {
                expr: expr(src, "expr")?,
                stationary: *stationary,
                continuity: match continuity {
                    ContinuityConfig::Lower => ContinuityClass::Lower,
                    ContinuityConfig::Upper => ContinuityClass::Upper,
                    ContinuityConfig::Neither => ContinuityClass::Neither,
                },
                breaks: breaks.clone(),
                singular: singular.clone(),
            },
        };
        let k = KernelSpec {
            family,
            scale: self.scale,
        };
        k.validate()?;
        Ok(k)
    }
}

fn default_cut() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub s_range: [f64; 2],
    pub ds: f64,
    #[serde(default)]
    pub u_points: Vec<f64>,
    #[serde(default = "default_cut")]
    pub small_jump_cut: f64,
}

impl GridConfig {
    pub fn resolve(&self, seed: u64) -> Result<SimGrid, Error> {
        SimGrid::new(self.s_range, self.ds, self.u_points.clone(), self.small_jump_cut, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuConfig {
    Lebesgue { support: [f64; 2] },
    /// Density expression in `u`.
    Weighted { density: String, support: [f64; 2] },
}

impl MuConfig {
    pub fn resolve(&self) -> Result<IntegratorMeasure, Error> {
        let m = match self {
            MuConfig::Lebesgue { support } => IntegratorMeasure::lebesgue(support[0], support[1]),
            MuConfig::Weighted { density, support } => {
                IntegratorMeasure::weighted(expr(density, "density")?, support[0], support[1])?
            }
        };
        m.validate()?;
        Ok(m)
    }
}

/// A Volterra field: basis and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpecConfig {
    pub basis: BasisConfig,
    pub kernel: KernelConfig,
}

/// Reads a JSON document from a file, or inline when the argument itself
/// starts with `{` or `[`.
pub fn load<T: for<'de> Deserialize<'de>>(arg: &str, what: &str) -> Result<T, Error> {
    let trimmed = arg.trim_start();
    let (text, origin) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        (arg.to_string(), "inline JSON".to_string())
    } else {
        let text = std::fs::read_to_string(Path::new(arg))
            .map_err(|e| parse_error(format!("cannot read {what} file {arg}: {e}")))?;
        (text, arg.to_string())
    };
    serde_json::from_str(&text).map_err(|e| parse_error(format!("{what} ({origin}): {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_round_trip() {
        let c: ControlConfig = serde_json::from_str(r#"{"domain": ["-inf", 2]}"#).unwrap();
        assert_eq!(c.domain, [Bound(f64::NEG_INFINITY), Bound(2.0)]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ControlConfig>(&s).unwrap(), c);
    }

    #[test]
    fn families_parse() {
        let b: BasisConfig = serde_json::from_str(r#"{"family": "compound_poisson", "lambda": 1}"#).unwrap();
        let q = b.resolve().unwrap();
        assert!(!q.flags.centered);
        let b: BasisConfig =
            serde_json::from_str(r#"{"family": "gamma", "control": {"domain": [-10, 1]}}"#).unwrap();
        assert_eq!(b.resolve().unwrap().control.domain.0[0], [-10.0, 1.0]);
        let k: KernelConfig = serde_json::from_str(r#"{"family": "gamma", "alpha": 0.25}"#).unwrap();
        assert_eq!(k.resolve().unwrap(), KernelSpec::gamma(0.25).unwrap());
        let k: KernelConfig =
            serde_json::from_str(r#"{"family": "custom", "expr": "exp(-(u - s)) * ind(s <= u)", "stationary": true}"#)
                .unwrap();
        assert!(k.resolve().is_ok());
    }

    #[test]
    fn malformed_input_is_a_config_error() {
        let e = load::<BasisConfig>(r#"{"family": "gaussian", "b": }"#, "basis").unwrap_err();
        assert!(matches!(e, Error::ConfigParse(ref m) if m.contains("line 1")), "{e}");
        let b: BasisConfig = serde_json::from_str(r#"{"family": "custom", "density": "exp(-x"}"#).unwrap();
        assert!(matches!(b.resolve(), Err(Error::ConfigParse(_))));
        assert!(serde_json::from_str::<BasisConfig>(r#"{"family": "gaussian", "bb": 1}"#).is_err());
    }
}
