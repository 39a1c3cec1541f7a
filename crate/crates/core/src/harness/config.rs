//! Line-oriented sweep configuration:
//!
//! ```text
//! k = 5
//! res = 128, 256
//! seed = 7
//!
//! [family.wide]
//! kind = ellipse
//! s = 0, 0.05, 0.1
//! ```

use std::path::Path;
use std::str::FromStr;

use super::SweepSpec;
use crate::eigensolver::DEFAULT_SEED;
use crate::geometry::{FamilyKind, FamilySpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConfig {
    pub name: String,
    pub spec: FamilySpec,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub k: usize,
    pub resolutions: Vec<usize>,
    pub alpha: Option<f64>,
    pub dim: usize,
    pub workers: Option<usize>,
    pub seed: u64,
    pub surgery: bool,
    pub families: Vec<FamilyConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: 5,
            resolutions: vec![64, 128],
            alpha: None,
            dim: 2,
            workers: None,
            seed: DEFAULT_SEED,
            surgery: true,
            families: Vec::new(),
        }
    }
}

// Section keys as written, before the dimension default is known.
#[derive(Default)]
struct Section {
    name: String,
    line: usize,
    kind: Option<FamilyKind>,
    dim: Option<usize>,
    shape: Vec<f64>,
    normalize: Option<bool>,
    params: Option<Vec<f64>>,
}

fn list<T: FromStr>(value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse().map_err(|_| Error::Config {
                line,
                message: format!("cannot parse `{v}`"),
            })
        })
        .collect()
}

fn one<T: FromStr>(value: &str, line: usize) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config {
        line,
        message: format!("cannot parse `{}`", value.trim()),
    })
}

fn boolean(value: &str, line: usize) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::Config {
            line,
            message: format!("expected a boolean, got `{other}`"),
        }),
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut sections: Vec<Section> = Vec::new();
        let mut seen: Vec<(usize, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(header) = content.strip_prefix('[') {
                let name = header
                    .strip_suffix(']')
                    .and_then(|h| h.trim().strip_prefix("family."))
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| Error::Config {
                        line,
                        message: format!("expected `[family.<name>]`, got `{content}`"),
                    })?;
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::Config {
                        line,
                        message: format!("duplicate family `{name}`"),
                    });
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    ..Section::default()
                });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let scope = sections.len();
            if seen.iter().any(|(s, k)| *s == scope && k == key) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            seen.push((scope, key.to_string()));
            match sections.last_mut() {
                None => match key {
                    "k" => cfg.k = one(value, line)?,
                    "res" => cfg.resolutions = list(value, line)?,
                    "alpha" => cfg.alpha = Some(one(value, line)?),
                    "dim" => cfg.dim = one(value, line)?,
                    "workers" => cfg.workers = Some(one(value, line)?),
                    "seed" => cfg.seed = one(value, line)?,
                    "surgery" => cfg.surgery = boolean(value, line)?,
                    other => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown key `{other}`"),
                        })
                    }
                },
                Some(section) => match key {
                    "kind" => {
                        section.kind = Some(value.trim().parse().map_err(|e: Error| Error::Config {
                            line,
                            message: e.to_string(),
                        })?)
                    }
                    "shape" => section.shape = list(value, line)?,
                    "normalize" => section.normalize = Some(boolean(value, line)?),
                    "s" => section.params = Some(list(value, line)?),
                    "dim" => section.dim = Some(one(value, line)?),
                    other => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown key `{other}` in family `{}`", section.name),
                        })
                    }
                },
            }
        }
        for s in sections {
            let kind = match s.kind {
                Some(kind) => kind,
                None => s.name.parse().map_err(|_| Error::Config {
                    line: s.line,
                    message: format!("family `{}` needs a `kind`", s.name),
                })?,
            };
            let params = s.params.ok_or_else(|| Error::Config {
                line: s.line,
                message: format!("family `{}` needs `s`", s.name),
            })?;
            let mut spec = FamilySpec::new(kind, s.dim.unwrap_or(cfg.dim)).with_shape(s.shape);
            spec.normalize = s.normalize.unwrap_or(true);
            cfg.families.push(FamilyConfig {
                name: s.name,
                spec,
                params,
            });
        }
        Ok(cfg)
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn sweeps(&self) -> Vec<SweepSpec> {
        self.families
            .iter()
            .map(|f| SweepSpec {
                family: f.name.clone(),
                spec: f.spec.clone(),
                params: f.params.clone(),
                k: self.k,
                resolutions: self.resolutions.clone(),
                alpha: self.alpha,
                seed: self.seed,
                surgery: self.surgery,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_globals_and_sections() {
        let cfg: Config = "\
# comment
k = 3
res = 32, 64
seed = 11
surgery = off

[family.ellipse]
s = 0, 0.1   # trailing comment

[family.notch]
kind = cap
normalize = false
dim = 3
s = 0.2
"
        .parse()
        .unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.resolutions, vec![32, 64]);
        assert_eq!(cfg.seed, 11);
        assert!(!cfg.surgery);
        assert_eq!(cfg.families.len(), 2);
        assert_eq!(cfg.families[0].spec.kind, FamilyKind::Ellipse);
        assert_eq!(cfg.families[0].params, vec![0.0, 0.1]);
        let notch = &cfg.families[1];
        assert_eq!(notch.spec.kind, FamilyKind::BallMinusCap);
        assert!(!notch.spec.normalize);
        assert_eq!(notch.spec.dim, 3);
        assert_eq!(cfg.sweeps()[1].family, "notch");
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in ["colour = red", "[family.ellipse]\ns = 0\nwidth = 2", "[section]\n", "k 5", "k = 2\nk = 3"] {
            assert!(matches!(text.parse::<Config>(), Err(Error::Config { .. })), "{text}");
        }
        assert!(matches!("[family.mystery]\ns = 0".parse::<Config>(), Err(Error::Config { line: 1, .. })));
        assert!(matches!("[family.ellipse]\n".parse::<Config>(), Err(Error::Config { .. })));
    }
}
