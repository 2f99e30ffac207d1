//! Run configuration parsing.
//!
//! The file format is deliberately primitive so any language can write it:
//! one `key = value` pair per line, `#` starts a comment, vectors are three
//! comma-separated numbers. Unknown and duplicate keys are errors; a typo
//! must not silently fall back to a default.

use crate::error::{DemError, Result};
use crate::math::Vec3;
use crate::scene::SceneKind;
use crate::state::{ContactModel, MaterialPair, SimConfig, SimpleConstants};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Everything a run needs: the simulation settings plus scene construction
/// parameters and output policy.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub scene: SceneKind,
    pub particle_count: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Write a snapshot every this many steps; 0 disables intermediate
    /// snapshots (the final state is always written).
    pub snapshot_every: u64,
    pub radius: f64,
    pub mass: f64,
    pub material: MaterialPair,
    /// Width of the bottom opening of the box_slit scene.
    pub slit_width: f64,
    /// Closing speed for two_body; also the velocity scale of random_gas.
    pub approach_speed: f64,
}

struct KeyBag {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyBag {
    fn parse(text: &str) -> Result<KeyBag> {
        let mut entries = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(DemError::config(format!(
                    "line {line_no}: expected `key = value`, got {line:?}"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(DemError::config(format!("line {line_no}: empty key")));
            }
            if let Some((first_line, _)) = entries.get(&key) {
                return Err(DemError::config(format!(
                    "line {line_no}: duplicate key {key:?} (first set on line {first_line})"
                )));
            }
            entries.insert(key, (line_no, value));
        }
        Ok(KeyBag { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, String)> {
        self.take(key)
            .ok_or_else(|| DemError::config(format!("missing required key {key:?}")))
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        let (line, value) = self.require(key)?;
        parse_f64(line, key, &value)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            Some((line, value)) => parse_f64(line, key, &value),
            None => Ok(default),
        }
    }

    fn u64(&mut self, key: &str) -> Result<u64> {
        let (line, value) = self.require(key)?;
        parse_u64(line, key, &value)
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            Some((line, value)) => parse_u64(line, key, &value),
            None => Ok(default),
        }
    }

    fn vec3(&mut self, key: &str) -> Result<Vec3> {
        let (line, value) = self.require(key)?;
        parse_vec3(line, key, &value)
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(DemError::config(format!("line {line}: unknown key {key:?}")));
        }
        Ok(())
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| {
        DemError::config(format!("line {line}: {key} must be a number, got {value:?}"))
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64> {
    value.parse().map_err(|_| {
        DemError::config(format!(
            "line {line}: {key} must be a non-negative integer, got {value:?}"
        ))
    })
}

fn parse_vec3(line: usize, key: &str, value: &str) -> Result<Vec3> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(DemError::config(format!(
            "line {line}: {key} must be three comma-separated numbers, got {value:?}"
        )));
    }
    Ok(Vec3::new(
        parse_f64(line, key, parts[0])?,
        parse_f64(line, key, parts[1])?,
        parse_f64(line, key, parts[2])?,
    ))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut bag = KeyBag::parse(text)?;

        let scene = {
            let (line, value) = bag.require("scene")?;
            SceneKind::parse(&value).map_err(|_| {
                DemError::config(format!(
                    "line {line}: scene must be box_slit, random_gas, two_body, or stack; got {value:?}"
                ))
            })?
        };
        let model = {
            let (line, value) = bag.require("model")?;
            match value.as_str() {
                "simple" => ContactModel::Simple,
                "practical" => ContactModel::Practical,
                _ => {
                    return Err(DemError::config(format!(
                        "line {line}: model must be simple or practical, got {value:?}"
                    )))
                }
            }
        };

        let particle_count = bag.u64("particle_count")? as usize;
        let seed = bag.u64("seed")?;
        let dt = bag.f64("dt")?;
        let gravity = bag.vec3("gravity")?;
        let domain_min = bag.vec3("domain_min")?;
        let domain_max = bag.vec3("domain_max")?;
        let termination_eps = bag.f64("termination_eps")?;
        let max_steps = bag.u64("max_steps")?;
        let radius = bag.f64("radius")?;
        let mass = bag.f64("mass")?;

        let cell_edge = match bag.take("cell_edge") {
            Some((line, value)) => parse_vec3(line, "cell_edge", &value)?,
            // Default matches the candidate-completeness requirement: one
            // particle diameter per cell edge.
            None => Vec3::splat(2.0 * radius),
        };

        let material = MaterialPair {
            spring_tangential: bag.f64("spring_tangential")?,
            spring_normal: bag.f64("spring_normal")?,
            restitution: bag.f64("restitution")?,
            friction: bag.f64("friction")?,
        };
        let simple = SimpleConstants {
            spring: bag.f64_or("simple_spring", 0.0)?,
            damping: bag.f64_or("simple_damping", 0.0)?,
            shear: bag.f64_or("simple_shear", 0.0)?,
        };

        let output_dir = match bag.take("output_dir") {
            Some((_, value)) => PathBuf::from(value),
            None => PathBuf::from("out"),
        };
        let snapshot_every = bag.u64_or("snapshot_every", 0)?;
        let slit_width = bag.f64_or("slit_width", 8.0 * radius)?;
        let approach_speed = bag.f64_or("approach_speed", 1.0)?;

        bag.finish()?;

        let config = RunConfig {
            sim: SimConfig {
                dt,
                gravity,
                domain_min,
                domain_max,
                cell_edge,
                termination_eps,
                max_steps,
                model,
                simple,
            },
            scene,
            particle_count,
            seed,
            output_dir,
            snapshot_every,
            radius,
            mass,
            material,
            slit_width,
            approach_speed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DemError::io(path.display().to_string(), e))?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.material.validate()?;
        if self.particle_count == 0 {
            return Err(DemError::config("particle_count must be at least 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(DemError::config(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(DemError::config(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.slit_width > 0.0 && self.slit_width.is_finite()) {
            return Err(DemError::config("slit_width must be positive"));
        }
        if !self.approach_speed.is_finite() {
            return Err(DemError::config("approach_speed must be finite"));
        }
        Ok(())
    }
}
