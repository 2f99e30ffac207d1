//! Initial conditions for the benchmark runs.
//!
//! Every builder is deterministic: the same `RunConfig` (including seed)
//! produces bit-identical particle arrays, which is what makes whole runs
//! reproducible across worker counts and machines.

use crate::config::RunConfig;
use crate::error::{DemError, Result};
use crate::math::Vec3;
use crate::state::{ParticleArrays, Wall, WallExtent};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Particles rain from an elevated box through a slit in its bottom.
    BoxSlit,
    /// Non-overlapping random positions and velocities, no walls.
    RandomGas,
    /// Two particles on a head-on collision course, no walls.
    TwoBody,
    /// A vertical column resting on the floor plane.
    Stack,
}

impl SceneKind {
    pub fn parse(name: &str) -> Result<SceneKind> {
        match name {
            "box_slit" => Ok(SceneKind::BoxSlit),
            "random_gas" => Ok(SceneKind::RandomGas),
            "two_body" => Ok(SceneKind::TwoBody),
            "stack" => Ok(SceneKind::Stack),
            _ => Err(DemError::config(format!("unknown scene {name:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::BoxSlit => "box_slit",
            SceneKind::RandomGas => "random_gas",
            SceneKind::TwoBody => "two_body",
            SceneKind::Stack => "stack",
        }
    }
}

/// Particles plus the static geometry they interact with.
#[derive(Debug, Clone)]
pub struct Scene {
    pub particles: ParticleArrays,
    pub walls: Vec<Wall>,
}

pub fn build_scene(config: &RunConfig) -> Result<Scene> {
    match config.scene {
        SceneKind::BoxSlit => build_box_slit(config),
        SceneKind::RandomGas => build_random_gas(config),
        SceneKind::TwoBody => build_two_body(config),
        SceneKind::Stack => build_stack(config),
    }
}

fn uniform_particles(config: &RunConfig) -> ParticleArrays {
    let mut arrays = ParticleArrays::zeroed(config.particle_count);
    arrays.radius.fill(config.radius);
    arrays.mass.fill(config.mass);
    arrays
}

fn domain_center(config: &RunConfig) -> Vec3 {
    (config.sim.domain_min + config.sim.domain_max) * 0.5
}

fn build_two_body(config: &RunConfig) -> Result<Scene> {
    if config.particle_count != 2 {
        return Err(DemError::config(format!(
            "two_body requires particle_count = 2, got {}",
            config.particle_count
        )));
    }
    let center = domain_center(config);
    let offset = 2.0 * config.radius;
    let half_speed = 0.5 * config.approach_speed;
    let mut arrays = uniform_particles(config);
    arrays.position[0] = center - Vec3::new(offset, 0.0, 0.0);
    arrays.position[1] = center + Vec3::new(offset, 0.0, 0.0);
    arrays.velocity[0] = Vec3::new(half_speed, 0.0, 0.0);
    arrays.velocity[1] = Vec3::new(-half_speed, 0.0, 0.0);
    Ok(Scene { particles: arrays, walls: Vec::new() })
}

fn build_stack(config: &RunConfig) -> Result<Scene> {
    let r = config.radius;
    let floor_z = config.sim.domain_min.z;
    let top_center = floor_z + r + (config.particle_count - 1) as f64 * 2.0 * r;
    if top_center + r > config.sim.domain_max.z {
        return Err(DemError::config(format!(
            "stack of {} particles with radius {r} does not fit the domain height",
            config.particle_count
        )));
    }
    let center = domain_center(config);
    let mut arrays = uniform_particles(config);
    for (i, position) in arrays.position.iter_mut().enumerate() {
        *position = Vec3::new(center.x, center.y, floor_z + r + i as f64 * 2.0 * r);
    }
    let floor = Wall::plane(
        Vec3::new(0.0, 0.0, floor_z),
        Vec3::new(0.0, 0.0, 1.0),
        0,
    )?;
    Ok(Scene { particles: arrays, walls: vec![floor] })
}

fn build_random_gas(config: &RunConfig) -> Result<Scene> {
    let r = config.radius;
    let lo = config.sim.domain_min + Vec3::splat(r);
    let hi = config.sim.domain_max - Vec3::splat(r);
    if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
        return Err(DemError::config("domain is too small for the particle radius"));
    }
    // Random sequential placement of hard spheres saturates well below the
    // close-packing fraction; refuse configurations that would stall.
    let interior = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
    let sphere_volume = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
    if config.particle_count as f64 * sphere_volume > 0.3 * interior {
        return Err(DemError::config(format!(
            "random_gas cannot pack {} spheres of radius {r} into this domain",
            config.particle_count
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut arrays = uniform_particles(config);
    let min_dist_sq = (2.0 * r) * (2.0 * r);
    let max_attempts = config.particle_count.max(16) * 1000;
    let mut attempts = 0usize;
    let mut placed = 0usize;
    while placed < config.particle_count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(DemError::config(format!(
                "random_gas gave up placing particle {placed} after {max_attempts} attempts"
            )));
        }
        let candidate = Vec3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        let clear = arrays.position[..placed]
            .iter()
            .all(|p| (*p - candidate).norm_squared() > min_dist_sq);
        if clear {
            arrays.position[placed] = candidate;
            placed += 1;
        }
    }
    let v = config.approach_speed;
    for velocity in arrays.velocity.iter_mut() {
        *velocity = Vec3::new(
            rng.gen_range(-v..=v),
            rng.gen_range(-v..=v),
            rng.gen_range(-v..=v),
        );
    }
    Ok(Scene { particles: arrays, walls: Vec::new() })
}

/// Lattice edge count for a cube holding at least `count` sites.
fn lattice_side(count: usize) -> usize {
    let mut n = (count as f64).cbrt().floor() as usize;
    while n * n * n < count {
        n += 1;
    }
    n.max(1)
}

fn build_box_slit(config: &RunConfig) -> Result<Scene> {
    let r = config.radius;
    let d = 2.0 * r;
    if config.slit_width < d {
        return Err(DemError::config(format!(
            "slit width {} is narrower than the particle diameter {d}",
            config.slit_width
        )));
    }

    let n = lattice_side(config.particle_count);
    let spacing = 1.05 * d;
    let box_width = n as f64 * spacing;
    if config.slit_width > box_width - d {
        return Err(DemError::config(format!(
            "slit width {} leaves no box bottom (box width {box_width})",
            config.slit_width
        )));
    }

    let min = config.sim.domain_min;
    let max = config.sim.domain_max;
    let extent = max - min;
    let center = domain_center(config);
    let floor_z = min.z;
    let box_bottom = floor_z + 0.25 * extent.z;
    let box_top = box_bottom + (n as f64 + 4.0) * spacing;
    if box_width + 2.0 * d > extent.x || box_width + 2.0 * d > extent.y {
        return Err(DemError::config(format!(
            "{} particles need a box {box_width} wide; the domain is only {} x {}",
            config.particle_count, extent.x, extent.y
        )));
    }
    if box_top > max.z {
        return Err(DemError::config(format!(
            "{} particles need a box reaching z = {box_top}; the domain tops out at {}",
            config.particle_count, max.z
        )));
    }

    let mut arrays = uniform_particles(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Jitter small enough that adjacent lattice sites can never start
    // overlapped: worst-case separation is spacing - 0.6 * (spacing - d) > d.
    let jitter = 0.3 * (spacing - d);
    let origin = Vec3::new(
        center.x - 0.5 * box_width + 0.5 * spacing,
        center.y - 0.5 * box_width + 0.5 * spacing,
        box_bottom + 0.5 * spacing,
    );
    let mut placed = 0usize;
    'fill: for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if placed == config.particle_count {
                    break 'fill;
                }
                let site = origin
                    + Vec3::new(i as f64 * spacing, j as f64 * spacing, k as f64 * spacing);
                let wobble = Vec3::new(
                    rng.gen_range(-jitter..=jitter),
                    rng.gen_range(-jitter..=jitter),
                    rng.gen_range(-jitter..=jitter),
                );
                arrays.position[placed] = site + wobble;
                placed += 1;
            }
        }
    }

    let mut walls = Vec::new();
    let x_axis = Vec3::new(1.0, 0.0, 0.0);
    let y_axis = Vec3::new(0.0, 1.0, 0.0);
    let z_axis = Vec3::new(0.0, 0.0, 1.0);

    walls.push(Wall::plane(Vec3::new(0.0, 0.0, floor_z), z_axis, 0)?);
    walls.push(Wall::plane(Vec3::new(min.x, 0.0, 0.0), x_axis, 0)?);
    walls.push(Wall::plane(Vec3::new(max.x, 0.0, 0.0), -x_axis, 0)?);
    walls.push(Wall::plane(Vec3::new(0.0, min.y, 0.0), y_axis, 0)?);
    walls.push(Wall::plane(Vec3::new(0.0, max.y, 0.0), -y_axis, 0)?);
    walls.push(Wall::plane(Vec3::new(0.0, 0.0, max.z), -z_axis, 0)?);

    let half_w = 0.5 * box_width;
    // Side walls run below the box bottom by a diameter so the corner seam
    // with the bottom slabs cannot be tunnelled through.
    let side_lo = box_bottom - 2.0 * d;
    let side_mid = 0.5 * (side_lo + box_top);
    let side_half = 0.5 * (box_top - side_lo);
    let side_extent_yz = WallExtent { axis_u: 1, axis_v: 2, half_u: half_w, half_v: side_half };
    let side_extent_xz = WallExtent { axis_u: 0, axis_v: 2, half_u: half_w, half_v: side_half };
    walls.push(Wall::patch(
        Vec3::new(center.x - half_w, center.y, side_mid),
        x_axis,
        0,
        side_extent_yz,
    )?);
    walls.push(Wall::patch(
        Vec3::new(center.x + half_w, center.y, side_mid),
        -x_axis,
        0,
        side_extent_yz,
    )?);
    walls.push(Wall::patch(
        Vec3::new(center.x, center.y - half_w, side_mid),
        y_axis,
        0,
        side_extent_xz,
    )?);
    walls.push(Wall::patch(
        Vec3::new(center.x, center.y + half_w, side_mid),
        -y_axis,
        0,
        side_extent_xz,
    )?);

    // Bottom slabs flank the slit, which runs the full y length of the box.
    let half_slit = 0.5 * config.slit_width;
    let slab_half = 0.5 * (half_w - half_slit);
    let slab_extent = WallExtent { axis_u: 0, axis_v: 1, half_u: slab_half, half_v: half_w };
    walls.push(Wall::patch(
        Vec3::new(center.x - half_slit - slab_half, center.y, box_bottom),
        z_axis,
        0,
        slab_extent,
    )?);
    walls.push(Wall::patch(
        Vec3::new(center.x + half_slit + slab_half, center.y, box_bottom),
        z_axis,
        0,
        slab_extent,
    )?);

    Ok(Scene { particles: arrays, walls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn config_for(scene: &str, count: usize) -> RunConfig {
        let text = format!(
            "\
scene = {scene}
model = practical
particle_count = {count}
seed = 42
dt = 1e-4
gravity = 0, 0, -9.81
domain_min = 0, 0, 0
domain_max = 1, 1, 1
termination_eps = 1e-9
max_steps = 100
radius = 0.02
mass = 0.01
spring_normal = 1e5
spring_tangential = 1e5
restitution = 0.5
friction = 0.4
"
        );
        RunConfig::parse(&text).unwrap()
    }

    fn assert_no_overlaps(arrays: &ParticleArrays) {
        for a in 0..arrays.len() {
            for b in (a + 1)..arrays.len() {
                let dist = (arrays.position[a] - arrays.position[b]).norm();
                let touch = arrays.radius[a] + arrays.radius[b];
                assert!(
                    dist >= touch,
                    "particles {a} and {b} start overlapped: {dist} < {touch}"
                );
            }
        }
    }

    #[test]
    fn two_body_closes_at_the_configured_speed() {
        let mut config = config_for("two_body", 2);
        config.approach_speed = 3.0;
        let scene = build_scene(&config).unwrap();
        assert!(scene.walls.is_empty());
        let gap = scene.particles.position[1] - scene.particles.position[0];
        let closing = (scene.particles.velocity[0] - scene.particles.velocity[1]).norm();
        assert_eq!(closing, 3.0);
        assert!(gap.x > 2.0 * config.radius, "bodies must start separated");
        assert_eq!(gap.y, 0.0);
        assert_eq!(gap.z, 0.0);
    }

    #[test]
    fn two_body_rejects_other_counts() {
        let config = config_for("two_body", 3);
        assert!(build_scene(&config).is_err());
    }

    #[test]
    fn stack_rests_on_the_floor_in_touching_steps() {
        let config = config_for("stack", 5);
        let scene = build_scene(&config).unwrap();
        assert_eq!(scene.walls.len(), 1);
        for (i, p) in scene.particles.position.iter().enumerate() {
            let expected = config.radius + i as f64 * 2.0 * config.radius;
            assert!((p.z - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn stack_taller_than_the_domain_is_rejected() {
        let config = config_for("stack", 50);
        assert!(build_scene(&config).is_err());
    }

    #[test]
    fn random_gas_is_non_overlapping_and_seed_stable() {
        let config = config_for("random_gas", 40);
        let scene = build_scene(&config).unwrap();
        assert_eq!(scene.particles.len(), 40);
        assert!(scene.walls.is_empty());
        assert_no_overlaps(&scene.particles);
        for p in &scene.particles.position {
            assert!(p.x >= config.radius && p.x <= 1.0 - config.radius);
            assert!(p.z >= config.radius && p.z <= 1.0 - config.radius);
        }
        let again = build_scene(&config).unwrap();
        assert_eq!(scene.particles.digest(), again.particles.digest());
        let mut other = config.clone();
        other.seed = 43;
        let different = build_scene(&other).unwrap();
        assert_ne!(scene.particles.digest(), different.particles.digest());
    }

    #[test]
    fn random_gas_rejects_impossible_packing() {
        let mut config = config_for("random_gas", 4000);
        config.radius = 0.05;
        assert!(build_scene(&config).is_err());
    }

    #[test]
    fn box_slit_places_everyone_inside_the_box_without_overlap() {
        let mut config = config_for("box_slit", 64);
        config.slit_width = 0.1;
        let scene = build_scene(&config).unwrap();
        assert_eq!(scene.particles.len(), 64);
        assert_eq!(scene.walls.len(), 12);
        assert_no_overlaps(&scene.particles);
        let box_bottom = 0.25;
        for p in &scene.particles.position {
            assert!(p.z > box_bottom + config.radius, "particle below box bottom: {p:?}");
            assert!(p.z < 1.0, "particle above domain: {p:?}");
        }
    }

    #[test]
    fn box_slit_slabs_leave_exactly_the_slit_open() {
        let mut config = config_for("box_slit", 64);
        config.slit_width = 0.1;
        let scene = build_scene(&config).unwrap();
        let slabs: Vec<&Wall> = scene
            .walls
            .iter()
            .filter(|w| w.extent.is_some() && w.normal.z != 0.0)
            .collect();
        assert_eq!(slabs.len(), 2);
        let half_u = slabs[0].extent.as_ref().unwrap().half_u;
        let left_inner = slabs[0].point.x + half_u;
        let right_inner = slabs[1].point.x - half_u;
        assert!((right_inner - left_inner - 0.1).abs() < 1e-12);
    }

    #[test]
    fn box_slit_rejects_a_slit_narrower_than_a_particle() {
        let mut config = config_for("box_slit", 64);
        config.slit_width = 0.03;
        let err = build_scene(&config).unwrap_err().to_string();
        assert!(err.contains("narrower"), "{err}");
    }

    #[test]
    fn box_slit_rejects_counts_the_domain_cannot_hold() {
        let config = config_for("box_slit", 40_000);
        assert!(build_scene(&config).is_err());
    }

    #[test]
    fn scene_names_round_trip() {
        for name in ["box_slit", "random_gas", "two_body", "stack"] {
            assert_eq!(SceneKind::parse(name).unwrap().name(), name);
        }
        assert!(SceneKind::parse("torus").is_err());
    }
}
