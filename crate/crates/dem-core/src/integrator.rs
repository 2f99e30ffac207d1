//! The per-step pipeline: rebuild the collision maps, reorder particle
//! state into spatial order, accumulate contact and wall forces per
//! particle, integrate, and carry the tangential history forward.
//!
//! A step touches state in two write phases separated by buffer swaps.
//! The reorder phase gathers the previous buffer through the sort
//! permutation; the force phase then reads only that sorted buffer and
//! writes each particle's integrated state into its own slot of the other
//! buffer. Candidate pairs are visited in ascending sorted-slot order and
//! per-worker scratch is merged in ascending worker order, so force
//! accumulation order never depends on the worker count.

use crate::error::{DemError, Result};
use crate::forces::{
    contact_geometry, contact_response, simple_contact_force, wall_contact_geometry, BodyState,
    PairKey, TangentialHistory,
};
use crate::grid::{self, GridMaps, GridSpec};
use crate::math::Vec3;
use crate::parallel::{run_workers, ExecutionPlan};
use crate::profiler::{
    record_step, StepStats, WorkerCounters, BRANCH_CONTACT, BRANCH_CONTACT_CAPPED,
    BRANCH_NO_CONTACT,
};
use crate::state::{
    split_chunks, ContactModel, MaterialTable, ParticleArrays, ParticleSet, SimConfig, Wall,
};

/// Result of one completed step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Largest position change of any particle during the step.
    pub max_displacement: f64,
    /// Number of completed steps, counting this one.
    pub step_index: u64,
    pub stats: StepStats,
}

/// Semi-implicit Euler update: velocity first, then position with the new
/// velocity. Angular motion uses the solid-sphere inertia 0.4·m·r².
/// Returns (position, velocity, angular velocity).
pub fn integrate_particle(
    body: &BodyState,
    force: Vec3,
    torque: Vec3,
    dt: f64,
    gravity: Vec3,
) -> (Vec3, Vec3, Vec3) {
    let velocity = body.velocity + (force / body.mass + gravity) * dt;
    let position = body.position + velocity * dt;
    let inertia = 0.4 * body.mass * body.radius * body.radius;
    let angular = body.angular_velocity + torque * (dt / inertia);
    (position, velocity, angular)
}

/// A run stops once every particle moved less than `termination_eps` in a
/// step (strictly less) or the step budget is exhausted.
pub fn termination_check(outcome: &StepOutcome, config: &SimConfig) -> bool {
    outcome.max_displacement < config.termination_eps || outcome.step_index >= config.max_steps
}

fn body_of(arrays: &ParticleArrays, j: usize) -> BodyState {
    BodyState {
        position: arrays.position[j],
        velocity: arrays.velocity[j],
        angular_velocity: arrays.angular_velocity[j],
        radius: arrays.radius[j],
        mass: arrays.mass[j],
    }
}

struct WorkerOutput {
    counters: WorkerCounters,
    updates: Vec<(PairKey, Vec3)>,
    max_displacement: f64,
}

/// A granular simulation: double-buffered particle state, static walls,
/// contact history, and the execution plan for the worker pool.
pub struct Simulation {
    config: SimConfig,
    spec: GridSpec,
    materials: MaterialTable,
    walls: Vec<Wall>,
    set: ParticleSet,
    history: TangentialHistory,
    plan: ExecutionPlan,
    step_index: u64,
}

impl Simulation {
    pub fn new(
        config: SimConfig,
        materials: MaterialTable,
        walls: Vec<Wall>,
        initial: ParticleArrays,
        worker_count: usize,
    ) -> Result<Simulation> {
        config.validate()?;
        if worker_count == 0 {
            return Err(DemError::config("worker count must be at least 1"));
        }
        for (i, &material) in initial.material.iter().enumerate() {
            if material as usize >= materials.materials() {
                return Err(DemError::config(format!(
                    "particle {i} references material {material}, but only {} are defined",
                    materials.materials()
                )));
            }
        }
        for (i, &p) in initial.position.iter().enumerate() {
            if !p.is_finite() {
                return Err(DemError::config(format!(
                    "particle {i} has a non-finite initial position"
                )));
            }
        }
        for (w, wall) in walls.iter().enumerate() {
            if (wall.normal.norm() - 1.0).abs() > 1e-12 {
                return Err(DemError::config(format!("wall {w} normal is not unit length")));
            }
            if wall.material as usize >= materials.materials() {
                return Err(DemError::config(format!(
                    "wall {w} references material {}, but only {} are defined",
                    wall.material,
                    materials.materials()
                )));
            }
        }
        let spec = GridSpec::from_config(&config);
        let plan = ExecutionPlan::new(initial.len(), worker_count);
        let set = ParticleSet::new(initial)?;
        Ok(Simulation {
            config,
            spec,
            materials,
            walls,
            set,
            history: TangentialHistory::new(),
            plan,
            step_index: 0,
        })
    }

    /// Current particle state, in the particle order of the latest step.
    pub fn particles(&self) -> &ParticleArrays {
        self.set.prev()
    }

    pub fn history(&self) -> &TangentialHistory {
        &self.history
    }

    /// Installs a previously saved contact history (snapshot resume).
    pub fn restore_history(&mut self, history: TangentialHistory) {
        self.history = history;
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn materials(&self) -> &MaterialTable {
        &self.materials
    }

    pub fn grid_spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Completed step count.
    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn worker_count(&self) -> usize {
        self.plan.worker_count()
    }

    pub fn plan(&self) -> &ExecutionPlan {
        &self.plan
    }

    /// Bit-level fingerprint of the current particle state.
    pub fn state_digest(&self) -> u64 {
        self.set.prev().digest()
    }

    pub fn total_momentum(&self) -> Vec3 {
        let arrays = self.set.prev();
        let mut p = Vec3::ZERO;
        for i in 0..arrays.len() {
            p += arrays.velocity[i] * arrays.mass[i];
        }
        p
    }

    /// Translational plus rotational kinetic energy.
    pub fn kinetic_energy(&self) -> f64 {
        let arrays = self.set.prev();
        let mut e = 0.0;
        for i in 0..arrays.len() {
            let m = arrays.mass[i];
            let r = arrays.radius[i];
            e += 0.5 * m * arrays.velocity[i].norm_squared();
            e += 0.5 * (0.4 * m * r * r) * arrays.angular_velocity[i].norm_squared();
        }
        e
    }

    /// Advances the simulation one step.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let step_number = self.step_index;
        let maps = GridMaps::build(&self.set.prev().position, &self.spec)?;

        // Reorder phase: gather the previous buffer into sorted order.
        {
            let (prev, next, written) = self.set.prev_and_next_mut();
            let chunks = split_chunks(next, written, self.plan.partition());
            run_workers(chunks, |_, mut chunk| {
                grid::gather_into_chunk(prev, &maps.sccm, &mut chunk);
            });
        }
        self.set.swap_buffers()?;

        // Force phase: read the sorted buffer, write integrated state.
        let results = {
            let config = &self.config;
            let spec = &self.spec;
            let materials = &self.materials;
            let walls = &self.walls;
            let history = &self.history;
            let maps = &maps;
            let (prev, next, written) = self.set.prev_and_next_mut();
            let chunks = split_chunks(next, written, self.plan.partition());
            run_workers(chunks, move |_, chunk| -> Result<WorkerOutput> {
                let mut counters = WorkerCounters::with_capacity(chunk.written.len());
                let mut updates: Vec<(PairKey, Vec3)> = Vec::new();
                let mut candidates: Vec<usize> = Vec::new();
                let mut max_displacement = 0.0f64;
                for local in 0..chunk.written.len() {
                    let j = chunk.start + local;
                    let me = body_of(prev, j);
                    let id_i = prev.id[j];
                    let mat_i = prev.material[j];
                    let mut force = Vec3::ZERO;
                    let mut torque = Vec3::ZERO;
                    let mut candidate_count = 0u32;
                    let mut contact_count = 0u32;

                    grid::candidate_particles(j, maps, spec, &mut candidates);
                    for &k in candidates.iter() {
                        candidate_count += 1;
                        let geom = contact_geometry(
                            me.position,
                            prev.position[k],
                            me.radius,
                            prev.radius[k],
                        )
                        .map_err(|e| explosion(step_number, id_i, e))?;
                        counters.norm_sqrts += 1;
                        if !geom.contact {
                            counters.branch_mask |= BRANCH_NO_CONTACT;
                            continue;
                        }
                        contact_count += 1;
                        let other = body_of(prev, k);
                        match config.model {
                            ContactModel::Simple => {
                                counters.branch_mask |= BRANCH_CONTACT;
                                let v_rel = me.velocity - other.velocity;
                                force += simple_contact_force(&geom, v_rel, &config.simple);
                            }
                            ContactModel::Practical => {
                                let id_k = prev.id[k];
                                let key = PairKey::particles(id_i, id_k);
                                let owner = id_i < id_k;
                                let stored = history.get(key);
                                let old = if owner { stored } else { -stored };
                                let pair = materials.pair(mat_i, prev.material[k]);
                                let v = me.velocity - other.velocity;
                                let spin = me.angular_velocity * me.radius
                                    + other.angular_velocity * other.radius;
                                let result = contact_response(
                                    &geom, v, spin, me.radius, me.mass, other.radius,
                                    other.mass, pair, old, config.dt,
                                );
                                counters.coefficient_sqrts += 2;
                                counters.norm_sqrts += 2;
                                counters.branch_mask |= if result.capped {
                                    BRANCH_CONTACT_CAPPED
                                } else {
                                    BRANCH_CONTACT
                                };
                                force += result.force;
                                torque += result.torque;
                                if owner {
                                    updates.push((key, result.new_tangential));
                                }
                            }
                        }
                    }

                    for (w_index, wall) in walls.iter().enumerate() {
                        counters.wall_checks += 1;
                        let geom = wall_contact_geometry(me.position, me.radius, wall)
                            .map_err(|e| explosion(step_number, id_i, e))?;
                        if wall.extent.is_some() {
                            counters.norm_sqrts += 1;
                        }
                        if !geom.contact {
                            continue;
                        }
                        counters.wall_contacts += 1;
                        match config.model {
                            ContactModel::Simple => {
                                force += simple_contact_force(&geom, me.velocity, &config.simple);
                            }
                            ContactModel::Practical => {
                                let key = PairKey::wall(id_i, w_index as u32);
                                let old = history.get(key);
                                let pair = materials.pair(mat_i, wall.material);
                                let spin = me.angular_velocity * me.radius;
                                let result = contact_response(
                                    &geom,
                                    me.velocity,
                                    spin,
                                    me.radius,
                                    me.mass,
                                    f64::INFINITY,
                                    f64::INFINITY,
                                    pair,
                                    old,
                                    config.dt,
                                );
                                counters.coefficient_sqrts += 2;
                                counters.norm_sqrts += 2;
                                force += result.force;
                                torque += result.torque;
                                updates.push((key, result.new_tangential));
                            }
                        }
                    }

                    if !force.is_finite() || !torque.is_finite() {
                        return Err(DemError::Explosion {
                            step: step_number,
                            particle: id_i,
                            detail: "accumulated contact force is non-finite".into(),
                        });
                    }
                    let (position, velocity, angular) =
                        integrate_particle(&me, force, torque, config.dt, config.gravity);
                    if !position.is_finite() || !velocity.is_finite() || !angular.is_finite() {
                        return Err(DemError::Explosion {
                            step: step_number,
                            particle: id_i,
                            detail: "integrated state is non-finite".into(),
                        });
                    }
                    let displacement = (position - me.position).norm();
                    if displacement > max_displacement {
                        max_displacement = displacement;
                    }

                    chunk.id[local] = id_i;
                    chunk.position[local] = position;
                    chunk.velocity[local] = velocity;
                    chunk.angular_velocity[local] = angular;
                    chunk.radius[local] = me.radius;
                    chunk.mass[local] = me.mass;
                    chunk.material[local] = mat_i;
                    chunk.force[local] = force;
                    chunk.torque[local] = torque;
                    chunk.written[local] = true;
                    counters.candidates.push(candidate_count);
                    counters.contacts.push(contact_count);
                }
                Ok(WorkerOutput { counters, updates, max_displacement })
            })
        };

        let mut merged_counters = Vec::with_capacity(results.len());
        let mut all_updates: Vec<(PairKey, Vec3)> = Vec::new();
        let mut max_displacement = 0.0f64;
        let mut failure: Option<DemError> = None;
        for result in results {
            match result {
                Ok(out) if failure.is_none() => {
                    merged_counters.push(out.counters);
                    all_updates.extend(out.updates);
                    max_displacement = max_displacement.max(out.max_displacement);
                }
                Ok(_) => {}
                Err(e) if failure.is_none() => failure = Some(e),
                Err(_) => {}
            }
        }
        if let Some(e) = failure {
            self.set.clear_write_mask();
            return Err(e);
        }

        self.history = TangentialHistory::rebuild(all_updates);
        let stats = record_step(merged_counters);
        self.set.swap_buffers()?;
        self.step_index += 1;
        Ok(StepOutcome { max_displacement, step_index: self.step_index, stats })
    }
}

fn explosion(step: u64, particle: u64, cause: DemError) -> DemError {
    let detail = match cause {
        DemError::Config(msg) => msg,
        other => other.to_string(),
    };
    DemError::Explosion { step, particle, detail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{MaterialPair, SimpleConstants};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn base_config() -> SimConfig {
        SimConfig {
            dt: 1e-3,
            gravity: Vec3::ZERO,
            domain_min: Vec3::splat(-1.0),
            domain_max: Vec3::splat(1.0),
            cell_edge: Vec3::splat(0.25),
            termination_eps: 0.0,
            max_steps: u64::MAX,
            model: ContactModel::Practical,
            simple: SimpleConstants { spring: 0.0, damping: 0.0, shear: 0.0 },
        }
    }

    fn soft_materials() -> MaterialTable {
        MaterialTable::uniform(MaterialPair {
            spring_tangential: 100.0,
            spring_normal: 100.0,
            restitution: 0.0,
            friction: 0.0,
        })
        .unwrap()
    }

    fn particles_at(points: &[(Vec3, Vec3)], radius: f64, mass: f64) -> ParticleArrays {
        let mut arrays = ParticleArrays::zeroed(points.len());
        for (i, &(p, v)) in points.iter().enumerate() {
            arrays.position[i] = p;
            arrays.velocity[i] = v;
            arrays.radius[i] = radius;
            arrays.mass[i] = mass;
        }
        arrays
    }

    #[test]
    fn empty_scene_steps_as_noop() {
        let mut sim = Simulation::new(
            base_config(),
            soft_materials(),
            Vec::new(),
            ParticleArrays::zeroed(0),
            2,
        )
        .unwrap();
        let outcome = sim.step().unwrap();
        assert_eq!(outcome.max_displacement, 0.0);
        assert_eq!(outcome.step_index, 1);
        assert_eq!(outcome.stats.total_candidates(), 0);
    }

    #[test]
    fn free_fall_follows_semi_implicit_euler() {
        let mut config = base_config();
        config.dt = 0.1;
        config.gravity = Vec3::new(0.0, 0.0, -9.8);
        let initial = particles_at(&[(Vec3::ZERO, Vec3::ZERO)], 0.05, 1.0);
        let mut sim = Simulation::new(config, soft_materials(), Vec::new(), initial, 1).unwrap();
        let outcome = sim.step().unwrap();
        let p = sim.particles();
        assert_relative_eq!(p.velocity[0].z, -0.98, max_relative = 1e-12);
        assert_relative_eq!(p.position[0].z, -0.098, max_relative = 1e-12);
        assert_relative_eq!(outcome.max_displacement, 0.098, max_relative = 1e-12);
    }

    #[test]
    fn integrate_particle_examples() {
        let body = BodyState {
            position: Vec3::new(1.0, 2.0, 3.0),
            velocity: Vec3::new(0.5, 0.0, -0.5),
            angular_velocity: Vec3::ZERO,
            radius: 1.0,
            mass: 1.0,
        };
        let (x, v, w) = integrate_particle(&body, Vec3::ZERO, Vec3::ZERO, 0.25, Vec3::ZERO);
        assert_eq!(v, body.velocity);
        assert_eq!(x, body.position + body.velocity * 0.25);
        assert_eq!(w, Vec3::ZERO);

        let torque = Vec3::new(0.0, 0.0, 2.0);
        let (_, _, spun) = integrate_particle(&body, Vec3::ZERO, torque, 0.1, Vec3::ZERO);
        // Inertia of a unit solid sphere is 0.4, so dw = 2 * 0.1 / 0.4.
        assert_relative_eq!(spun.z, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn termination_examples() {
        let mut config = base_config();
        config.termination_eps = 1e-6;
        config.max_steps = 100;
        let outcome = |disp: f64, index: u64| StepOutcome {
            max_displacement: disp,
            step_index: index,
            stats: StepStats::default(),
        };
        assert!(termination_check(&outcome(0.0, 1), &config));
        assert!(!termination_check(&outcome(1e-6, 1), &config), "strict inequality");
        assert!(termination_check(&outcome(1.0, 100), &config));
    }

    #[test]
    fn lone_pair_counts_match_hand_count() {
        let initial = particles_at(
            &[
                (Vec3::new(0.5, 0.5, 0.5), Vec3::ZERO),
                (Vec3::new(0.65, 0.5, 0.5), Vec3::ZERO),
            ],
            0.1,
            1.0,
        );
        let mut config = base_config();
        config.domain_min = Vec3::ZERO;
        config.domain_max = Vec3::splat(1.0);
        let mut sim = Simulation::new(config, soft_materials(), Vec::new(), initial, 1).unwrap();
        let outcome = sim.step().unwrap();
        assert_eq!(outcome.stats.candidates_checked, [1, 1]);
        assert_eq!(outcome.stats.contacts_found, [1, 1]);
        // Two coefficient roots per pair evaluation, one evaluation per side.
        assert_eq!(outcome.stats.sqrt_calls, 4);
        // Geometry, |F_n|, and |F_t| per evaluation.
        assert_eq!(outcome.stats.norm_sqrt_calls, 6);
        assert_eq!(outcome.stats.branch_path_count, 1);
    }

    #[test]
    fn contact_history_appears_and_prunes() {
        let initial = particles_at(
            &[
                (Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.2, 0.0, 0.0)),
                (Vec3::new(0.65, 0.5, 0.5), Vec3::ZERO),
            ],
            0.1,
            1.0,
        );
        let mut config = base_config();
        config.domain_min = Vec3::ZERO;
        config.domain_max = Vec3::splat(1.0);
        config.dt = 1e-4;
        let mut sim = Simulation::new(config, soft_materials(), Vec::new(), initial, 1).unwrap();
        sim.step().unwrap();
        assert_eq!(sim.history().len(), 1);
        assert!(sim.history().contains(PairKey::particles(0, 1)));

        // Step until the spring separates the pair; the entry must vanish.
        for _ in 0..20_000 {
            let outcome = sim.step().unwrap();
            if outcome.stats.total_contacts() == 0 {
                break;
            }
        }
        assert!(sim.history().is_empty(), "history must prune on separation");
    }

    #[test]
    fn momentum_is_conserved_without_walls_or_gravity() {
        let initial = particles_at(
            &[
                (Vec3::new(-0.3, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)),
                (Vec3::new(0.3, 0.01, 0.0), Vec3::new(-0.3, 0.0, 0.0)),
            ],
            0.1,
            1.0,
        );
        let mut initial = initial;
        initial.mass[1] = 2.0;
        let mut config = base_config();
        config.dt = 1e-4;
        let stiff = MaterialTable::uniform(MaterialPair {
            spring_tangential: 1e4,
            spring_normal: 1e4,
            restitution: 0.0,
            friction: 0.0,
        })
        .unwrap();
        let mut sim = Simulation::new(config, stiff, Vec::new(), initial, 2).unwrap();
        let before = sim.total_momentum();
        for _ in 0..5_000 {
            sim.step().unwrap();
        }
        let after = sim.total_momentum();
        let drift = (after - before).norm() / before.norm();
        assert!(drift < 1e-10, "momentum drift {drift}");
    }

    #[test]
    fn trajectories_are_identical_for_any_worker_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<(Vec3, Vec3)> = (0..64)
            .map(|_| {
                (
                    Vec3::new(
                        rng.gen_range(-0.9..0.9),
                        rng.gen_range(-0.9..0.9),
                        rng.gen_range(-0.9..0.9),
                    ),
                    Vec3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                    ),
                )
            })
            .collect();
        let initial = particles_at(&points, 0.08, 0.5);
        let pair = MaterialPair {
            spring_tangential: 50.0,
            spring_normal: 80.0,
            restitution: 0.3,
            friction: 0.4,
        };
        let run = |workers: usize| -> Vec<u64> {
            let mut sim = Simulation::new(
                base_config(),
                MaterialTable::uniform(pair).unwrap(),
                Vec::new(),
                initial.clone(),
                workers,
            )
            .unwrap();
            (0..50)
                .map(|_| {
                    sim.step().unwrap();
                    sim.state_digest()
                })
                .collect()
        };
        let serial = run(1);
        for workers in [2, 3, 8] {
            assert_eq!(run(workers), serial, "workers={workers} diverged");
        }
    }

    #[test]
    fn divergent_run_reports_explosion() {
        let initial = particles_at(&[(Vec3::ZERO, Vec3::ZERO)], 0.05, 1.0);
        let mut config = base_config();
        config.gravity = Vec3::new(0.0, 0.0, -1e300);
        config.dt = 1e10;
        let mut sim = Simulation::new(config, soft_materials(), Vec::new(), initial, 1).unwrap();
        let err = sim.step().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        match err {
            DemError::Explosion { step, particle, .. } => {
                assert_eq!(step, 0);
                assert_eq!(particle, 0);
            }
            other => panic!("expected explosion, got {other}"),
        }
    }

    #[test]
    fn wall_contact_stops_falling_particle() {
        let mut config = base_config();
        config.gravity = Vec3::new(0.0, 0.0, -9.8);
        config.dt = 1e-4;
        let materials = MaterialTable::uniform(MaterialPair {
            spring_tangential: 5e3,
            spring_normal: 5e3,
            restitution: 0.8,
            friction: 0.2,
        })
        .unwrap();
        let floor = Wall::plane(Vec3::splat(-0.9), Vec3::new(0.0, 0.0, 1.0), 0).unwrap();
        let initial = particles_at(&[(Vec3::new(0.0, 0.0, -0.5), Vec3::ZERO)], 0.05, 0.01);
        let mut sim = Simulation::new(config, materials, vec![floor], initial, 1).unwrap();
        let mut wall_contacts = 0;
        for _ in 0..20_000 {
            let outcome = sim.step().unwrap();
            wall_contacts += outcome.stats.wall_contacts;
        }
        assert!(wall_contacts > 0, "particle never touched the floor");
        let z = sim.particles().position[0].z;
        assert!(z > -0.9, "particle fell through the floor: z={z}");
        assert!(z < -0.7, "particle did not settle near the floor: z={z}");
    }
}
