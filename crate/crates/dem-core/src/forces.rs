//! Contact force models and the per-pair tangential spring history.
//!
//! Two models are provided. The simple model is a linear spring plus
//! damping on the full relative velocity plus a shear term, with constant
//! coefficients and no torque. The practical model derives stiffness from
//! the overlap, damps normal and tangential motion separately, accumulates
//! a tangential spring displacement across steps, caps the tangential force
//! by Coulomb friction, and produces a contact torque.
//!
//! Sign conventions, fixed here once for every kernel: `normal` is the unit
//! vector from particle i toward its partner j, relative velocity is
//! `v_i - v_j`, and all returned forces act on particle i so a positive
//! overlap yields a push along `-normal`. Swapping the roles of i and j
//! (with the mirrored history vector) negates every factor exactly, so the
//! computed pair forces are antisymmetric bit for bit. Gravity is a body
//! force applied once per particle by the integrator, never per pair.
//!
//! Walls enter the same kernels as partners of infinite radius and mass:
//! the reciprocals IEEE-collapse to zero, which IS the analytic wall limit,
//! so no separate wall formulas exist.

use crate::error::{DemError, Result};
use crate::math::Vec3;
use crate::state::{MaterialPair, SimpleConstants, Wall};
use std::collections::BTreeMap;

/// Relative placement of two bodies at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactGeometry {
    /// Unit vector from particle i toward partner j.
    pub normal: Vec3,
    /// Interpenetration depth, clamped to 0 when separated.
    pub overlap: f64,
    pub contact: bool,
}

/// Geometry of a particle pair. Errors on coincident centers, where no
/// contact direction exists.
pub fn contact_geometry(x_i: Vec3, x_j: Vec3, r_i: f64, r_j: f64) -> Result<ContactGeometry> {
    let diff = x_j - x_i;
    let dist_sq = diff.norm_squared();
    if dist_sq == 0.0 {
        return Err(DemError::config(
            "coincident particle centers leave the contact direction undefined",
        ));
    }
    let dist = dist_sq.sqrt();
    let normal = diff / dist;
    let overlap = (r_i + r_j - dist).max(0.0);
    Ok(ContactGeometry { normal, overlap, contact: overlap > 0.0 })
}

/// Geometry of a particle against a wall. Plane walls are one-sided: the
/// solid fills the half-space behind the plane, and a particle whose center
/// has passed more than its radius beyond the plane has tunneled, which is
/// an error. Bounded patches use the closest point of the rectangle and act
/// double-sided, so a particle can pass around their edges.
pub fn wall_contact_geometry(position: Vec3, radius: f64, wall: &Wall) -> Result<ContactGeometry> {
    match wall.extent {
        None => {
            let signed = (position - wall.point).dot(wall.normal);
            if signed < -radius {
                return Err(DemError::config(format!(
                    "particle tunneled behind a wall (signed distance {signed:.6e}, radius {radius:.6e})"
                )));
            }
            let overlap = (radius - signed).max(0.0);
            Ok(ContactGeometry {
                normal: -wall.normal,
                overlap,
                contact: overlap > 0.0,
            })
        }
        Some(extent) => {
            let mut closest = wall.point;
            for (axis, half) in [(extent.axis_u, extent.half_u), (extent.axis_v, extent.half_v)] {
                let center = wall.point.component(axis);
                let value = position.component(axis).clamp(center - half, center + half);
                closest.set_component(axis, value);
            }
            let diff = position - closest;
            let dist_sq = diff.norm_squared();
            if dist_sq == 0.0 {
                return Err(DemError::config(
                    "particle center lies exactly on a wall patch",
                ));
            }
            let dist = dist_sq.sqrt();
            let overlap = (radius - dist).max(0.0);
            Ok(ContactGeometry {
                normal: diff / -dist,
                overlap,
                contact: overlap > 0.0,
            })
        }
    }
}

/// Simple-model force on particle i: spring on the overlap vector, damping
/// on the full relative velocity, shear on its tangential part. No torque,
/// no history.
pub fn simple_contact_force(
    geom: &ContactGeometry,
    v_rel: Vec3,
    constants: &SimpleConstants,
) -> Vec3 {
    let n = geom.normal;
    let v_t = v_rel - n * v_rel.dot(n);
    n * (-(constants.spring * geom.overlap)) + v_rel * constants.damping + v_t * constants.shear
}

/// Overlap-dependent spring stiffnesses (tangential, normal). The shared
/// factor sqrt(overlap / (r_i^-1 + r_j^-1)) is the single square root of
/// this function; an infinite partner radius collapses the denominator to
/// r_i^-1, which is the wall limit.
pub fn stiffness_coeffs(pair: &MaterialPair, r_i: f64, r_j: f64, overlap: f64) -> (f64, f64) {
    let shared = (overlap / (r_i.recip() + r_j.recip())).sqrt();
    (pair.spring_tangential * shared, pair.spring_normal * shared)
}

/// Damping coefficient scaled by the restitution parameter. One square
/// root; an infinite partner mass collapses the denominator to m_i^-1.
pub fn damping_coeff(restitution: f64, k_n: f64, m_i: f64, m_j: f64) -> f64 {
    restitution * (k_n / (m_i.recip() + m_j.recip())).sqrt()
}

/// Tangential relative surface velocity: the non-normal part of v_i - v_j
/// plus the surface speed contributed by both spins.
pub fn tangential_velocity(
    v_i: Vec3,
    v_j: Vec3,
    w_i: Vec3,
    w_j: Vec3,
    r_i: f64,
    r_j: f64,
    n: Vec3,
) -> Vec3 {
    let v = v_i - v_j;
    let spin = w_i * r_i + w_j * r_j;
    tangential_with_spin(v, spin, n)
}

fn tangential_with_spin(v: Vec3, spin: Vec3, n: Vec3) -> Vec3 {
    v - n * v.dot(n) + spin.cross(n)
}

/// Carries the tangential spring displacement across one step: the old
/// vector is re-projected onto the current tangent plane, then grown by
/// the tangential velocity.
pub fn update_tangential_displacement(old: Vec3, n: Vec3, v_t: Vec3, dt: f64) -> Vec3 {
    old - n * old.dot(n) + v_t * dt
}

/// Coulomb limit: rescales the tangential force to magnitude mu * |F_n|
/// when it exceeds that, keeping its direction.
pub fn friction_cap(f_t: Vec3, f_n: Vec3, mu: f64) -> Vec3 {
    friction_cap_detailed(f_t, f_n, mu).0
}

fn friction_cap_detailed(f_t: Vec3, f_n: Vec3, mu: f64) -> (Vec3, bool) {
    let limit = mu * f_n.norm();
    let magnitude = f_t.norm();
    if magnitude > limit {
        (f_t * (limit / magnitude), true)
    } else {
        (f_t, false)
    }
}

/// One practical-model evaluation for particle i against a contacting
/// partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairForceResult {
    /// Force on particle i.
    pub force: Vec3,
    /// Torque on particle i: r_i * (n x F_t).
    pub torque: Vec3,
    /// Tangential displacement to store for the next step, in i's frame.
    pub new_tangential: Vec3,
    /// Whether the friction cap rescaled the tangential force.
    pub capped: bool,
}

impl PairForceResult {
    pub const ZERO: PairForceResult = PairForceResult {
        force: Vec3::ZERO,
        torque: Vec3::ZERO,
        new_tangential: Vec3::ZERO,
        capped: false,
    };
}

/// Practical-model core shared by particle and wall contacts. The partner
/// is described by (radius, mass), infinite for walls; `v` is the relative
/// velocity of i against the partner and `spin` the summed surface spin
/// term r_i*w_i + r_j*w_j (the wall contribution is zero, a static wall has
/// no surface velocity).
pub fn contact_response(
    geom: &ContactGeometry,
    v: Vec3,
    spin: Vec3,
    r_i: f64,
    m_i: f64,
    r_j: f64,
    m_j: f64,
    pair: &MaterialPair,
    old_tangential: Vec3,
    dt: f64,
) -> PairForceResult {
    let n = geom.normal;
    let (k_t, k_n) = stiffness_coeffs(pair, r_i, r_j, geom.overlap);
    let eta = damping_coeff(pair.restitution, k_n, m_i, m_j);
    let v_n = n * v.dot(n);
    let v_t = tangential_with_spin(v, spin, n);
    let new_tangential = update_tangential_displacement(old_tangential, n, v_t, dt);
    let f_n = n * (-(k_n * geom.overlap)) - v_n * eta;
    let f_t_raw = new_tangential * (-k_t) - v_t * eta;
    let (f_t, capped) = friction_cap_detailed(f_t_raw, f_n, pair.friction);
    PairForceResult {
        force: f_t + f_n,
        torque: n.cross(f_t) * r_i,
        new_tangential,
        capped,
    }
}

/// Per-particle view needed by the force kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub radius: f64,
    pub mass: f64,
}

/// Practical-model force, torque, and history update for particle i
/// against particle j. `old_tangential` must be given in i's frame (negate
/// the stored vector when i is the higher-id side).
pub fn practical_pair_force(
    i: &BodyState,
    j: &BodyState,
    pair: &MaterialPair,
    old_tangential: Vec3,
    dt: f64,
) -> Result<PairForceResult> {
    let geom = contact_geometry(i.position, j.position, i.radius, j.radius)?;
    let v = i.velocity - j.velocity;
    let spin = i.angular_velocity * i.radius + j.angular_velocity * j.radius;
    Ok(contact_response(
        &geom,
        v,
        spin,
        i.radius,
        i.mass,
        j.radius,
        j.mass,
        pair,
        old_tangential,
        dt,
    ))
}

/// Practical-model force for a particle against a wall, which behaves as a
/// static partner of infinite radius and mass.
pub fn wall_pair_force(
    p: &BodyState,
    wall: &Wall,
    pair: &MaterialPair,
    old_tangential: Vec3,
    dt: f64,
) -> Result<PairForceResult> {
    let geom = wall_contact_geometry(p.position, p.radius, wall)?;
    let spin = p.angular_velocity * p.radius;
    Ok(contact_response(
        &geom,
        p.velocity,
        spin,
        p.radius,
        p.mass,
        f64::INFINITY,
        f64::INFINITY,
        pair,
        old_tangential,
        dt,
    ))
}

/// Identity of a contact for history storage. Particle pairs are keyed by
/// ascending stable id; the stored vector lives in the lower-id particle's
/// frame. Wall contacts are keyed by (particle id, wall index) and stored
/// in the particle's frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PairKey {
    Particles(u64, u64),
    ParticleWall(u64, u32),
}

impl PairKey {
    pub fn particles(a: u64, b: u64) -> PairKey {
        if a <= b {
            PairKey::Particles(a, b)
        } else {
            PairKey::Particles(b, a)
        }
    }

    pub fn wall(particle: u64, wall_index: u32) -> PairKey {
        PairKey::ParticleWall(particle, wall_index)
    }
}

/// Tangential spring displacements of all contacts alive at the previous
/// step. Absent keys read as zero, the correct spring state for a fresh
/// contact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TangentialHistory {
    entries: BTreeMap<PairKey, Vec3>,
}

impl TangentialHistory {
    pub fn new() -> TangentialHistory {
        TangentialHistory::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: PairKey) -> Vec3 {
        self.entries.get(&key).copied().unwrap_or(Vec3::ZERO)
    }

    pub fn contains(&self, key: PairKey) -> bool {
        self.entries.contains_key(&key)
    }

    pub fn insert(&mut self, key: PairKey, value: Vec3) {
        self.entries.insert(key, value);
    }

    /// Entries in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &Vec3)> {
        self.entries.iter()
    }

    /// Replaces the whole history with this step's collected updates.
    /// Exactly one side of each contact emits an update, so the updates
    /// are the new contact set.
    pub fn rebuild(updates: impl IntoIterator<Item = (PairKey, Vec3)>) -> TangentialHistory {
        TangentialHistory { entries: updates.into_iter().collect() }
    }
}

/// Keeps only the entries of pairs still in contact; pairs entering
/// contact get a zero entry. A pair that separated and re-contacts later
/// therefore restarts with no spring memory.
pub fn history_prune(
    history: &TangentialHistory,
    current_contacts: impl IntoIterator<Item = PairKey>,
) -> TangentialHistory {
    TangentialHistory {
        entries: current_contacts
            .into_iter()
            .map(|key| (key, history.get(key)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::WallExtent;
    use approx::assert_relative_eq;

    fn unit_pair() -> MaterialPair {
        MaterialPair {
            spring_tangential: 1.0,
            spring_normal: 1.0,
            restitution: 0.0,
            friction: 0.0,
        }
    }

    fn body(position: Vec3, velocity: Vec3) -> BodyState {
        BodyState {
            position,
            velocity,
            angular_velocity: Vec3::ZERO,
            radius: 1.0,
            mass: 1.0,
        }
    }

    #[test]
    fn separated_particles_do_not_contact() {
        let g = contact_geometry(Vec3::ZERO, Vec3::new(3.0, 0.0, 0.0), 1.0, 1.0).unwrap();
        assert!(!g.contact);
        assert_eq!(g.overlap, 0.0);
    }

    #[test]
    fn overlapping_particles_contact_along_center_line() {
        let g = contact_geometry(Vec3::ZERO, Vec3::new(1.5, 0.0, 0.0), 1.0, 1.0).unwrap();
        assert!(g.contact);
        assert_eq!(g.normal, Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(g.overlap, 0.5);
    }

    #[test]
    fn coincident_centers_error() {
        let p = Vec3::new(0.3, 0.3, 0.3);
        assert!(contact_geometry(p, p, 1.0, 1.0).is_err());
    }

    #[test]
    fn simple_spring_pushes_particles_apart() {
        let geom = ContactGeometry {
            normal: Vec3::new(1.0, 0.0, 0.0),
            overlap: 0.1,
            contact: true,
        };
        let constants = SimpleConstants { spring: 100.0, damping: 0.0, shear: 0.0 };
        let f = simple_contact_force(&geom, Vec3::ZERO, &constants);
        assert_relative_eq!(f.x, -10.0);
        assert_eq!((f.y, f.z), (0.0, 0.0));
    }

    #[test]
    fn simple_force_vanishes_with_zero_constants() {
        let geom = ContactGeometry {
            normal: Vec3::new(0.0, 1.0, 0.0),
            overlap: 0.2,
            contact: true,
        };
        let constants = SimpleConstants { spring: 0.0, damping: 0.0, shear: 0.0 };
        let f = simple_contact_force(&geom, Vec3::new(1.0, 2.0, 3.0), &constants);
        assert_eq!(f, Vec3::ZERO);
    }

    #[test]
    fn simple_damping_follows_relative_velocity() {
        let geom = ContactGeometry {
            normal: Vec3::new(1.0, 0.0, 0.0),
            overlap: 0.1,
            contact: true,
        };
        let constants = SimpleConstants { spring: 0.0, damping: 2.0, shear: 0.0 };
        let f = simple_contact_force(&geom, Vec3::new(1.0, 0.0, 0.0), &constants);
        assert_eq!(f, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn stiffness_vanishes_at_zero_overlap() {
        let (k_t, k_n) = stiffness_coeffs(&unit_pair(), 1.0, 1.0, 0.0);
        assert_eq!((k_t, k_n), (0.0, 0.0));
    }

    #[test]
    fn stiffness_direct_evaluation() {
        let pair = MaterialPair { spring_normal: 2.0, ..unit_pair() };
        // r_i = r_j = 2 makes the reciprocal sum 1, so k_n = 2 * sqrt(1).
        let (_, k_n) = stiffness_coeffs(&pair, 2.0, 2.0, 1.0);
        assert_relative_eq!(k_n, 2.0);
    }

    #[test]
    fn stiffness_wall_limit_matches_huge_partner() {
        let pair = MaterialPair { spring_normal: 3.0, ..unit_pair() };
        let (_, exact) = stiffness_coeffs(&pair, 0.5, f64::INFINITY, 0.01);
        assert_relative_eq!(exact, 3.0 * (0.01f64 * 0.5).sqrt(), max_relative = 1e-15);
        let (_, huge) = stiffness_coeffs(&pair, 0.5, 1e12, 0.01);
        assert_relative_eq!(huge, exact, max_relative = 1e-3);
    }

    #[test]
    fn damping_direct_and_limit_cases() {
        assert_eq!(damping_coeff(0.0, 123.0, 1.0, 1.0), 0.0);
        assert_relative_eq!(damping_coeff(1.0, 4.0, 2.0, 2.0), 2.0);
        let wall = damping_coeff(0.7, 9.0, 2.0, f64::INFINITY);
        assert_relative_eq!(wall, 0.7 * (9.0f64 * 2.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn tangential_velocity_examples() {
        let n = Vec3::new(1.0, 0.0, 0.0);
        let v = Vec3::new(0.4, -0.2, 0.9);
        assert_eq!(
            tangential_velocity(v, v, Vec3::ZERO, Vec3::ZERO, 1.0, 1.0, n),
            Vec3::ZERO
        );
        assert_eq!(
            tangential_velocity(Vec3::new(0.0, 1.0, 0.0), Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, 1.0, 1.0, n),
            Vec3::new(0.0, 1.0, 0.0)
        );
        let spin_only = tangential_velocity(
            Vec3::ZERO,
            Vec3::ZERO,
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::ZERO,
            1.0,
            1.0,
            n,
        );
        assert_eq!(spin_only, Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn tangential_displacement_examples() {
        let n = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(
            update_tangential_displacement(Vec3::ZERO, n, Vec3::ZERO, 0.1),
            Vec3::ZERO
        );
        let kept = update_tangential_displacement(Vec3::new(0.0, 1.0, 0.0), n, Vec3::ZERO, 0.1);
        assert_eq!(kept, Vec3::new(0.0, 1.0, 0.0));
        let grown = update_tangential_displacement(
            Vec3::new(1.0, 1.0, 0.0),
            n,
            Vec3::new(0.0, 0.0, 2.0),
            0.5,
        );
        assert_eq!(grown, Vec3::new(0.0, 1.0, 1.0));
    }

    #[test]
    fn friction_cap_examples() {
        let f_n = Vec3::new(0.0, 0.0, 1.0);
        let small = Vec3::new(0.1, 0.0, 0.0);
        assert_eq!(friction_cap(small, f_n, 0.5), small);

        let capped = friction_cap(Vec3::new(3.0, 4.0, 0.0), f_n, 1.0);
        assert_relative_eq!(capped.x, 0.6);
        assert_relative_eq!(capped.y, 0.8);

        assert_eq!(friction_cap(Vec3::ZERO, f_n, 0.5), Vec3::ZERO);
    }

    #[test]
    fn stationary_overlap_gives_pure_normal_repulsion() {
        let i = body(Vec3::ZERO, Vec3::ZERO);
        let j = body(Vec3::new(1.5, 0.0, 0.0), Vec3::ZERO);
        let r = practical_pair_force(&i, &j, &unit_pair(), Vec3::ZERO, 1e-3).unwrap();
        assert!(r.force.x < 0.0, "force must push i away from j");
        assert_eq!((r.force.y, r.force.z), (0.0, 0.0));
        assert_eq!(r.torque, Vec3::ZERO);
        assert!(!r.capped);
    }

    #[test]
    fn swapping_roles_negates_force_bitwise() {
        let pair = MaterialPair {
            spring_tangential: 2.0,
            spring_normal: 5.0,
            restitution: 0.3,
            friction: 0.4,
        };
        let i = BodyState {
            position: Vec3::new(0.1, -0.2, 0.3),
            velocity: Vec3::new(0.5, 0.1, -0.7),
            angular_velocity: Vec3::new(1.0, -2.0, 0.5),
            radius: 0.8,
            mass: 1.3,
        };
        let j = BodyState {
            position: Vec3::new(0.9, 0.4, -0.1),
            velocity: Vec3::new(-0.2, 0.0, 0.4),
            angular_velocity: Vec3::new(0.0, 1.5, -0.3),
            radius: 0.9,
            mass: 0.7,
        };
        let t = Vec3::new(0.01, -0.02, 0.005);
        let ij = practical_pair_force(&i, &j, &pair, t, 1e-3).unwrap();
        let ji = practical_pair_force(&j, &i, &pair, -t, 1e-3).unwrap();
        assert_eq!(ij.force.x.to_bits(), (-ji.force.x).to_bits());
        assert_eq!(ij.force.y.to_bits(), (-ji.force.y).to_bits());
        assert_eq!(ij.force.z.to_bits(), (-ji.force.z).to_bits());
        assert_eq!(ij.new_tangential, -ji.new_tangential);
        assert_eq!(ij.capped, ji.capped);
    }

    #[test]
    fn approach_damping_strengthens_normal_force() {
        let i = body(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0));
        let j = body(Vec3::new(1.5, 0.0, 0.0), Vec3::ZERO);
        let undamped = practical_pair_force(&i, &j, &unit_pair(), Vec3::ZERO, 1e-3).unwrap();
        let damped_pair = MaterialPair { restitution: 0.5, ..unit_pair() };
        let damped = practical_pair_force(&i, &j, &damped_pair, Vec3::ZERO, 1e-3).unwrap();
        assert!(damped.force.norm() > undamped.force.norm());
    }

    #[test]
    fn resting_on_plane_is_force_free() {
        let wall = Wall::plane(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0).unwrap();
        let p = body(Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO);
        let r = wall_pair_force(&p, &wall, &unit_pair(), Vec3::ZERO, 1e-3).unwrap();
        assert_eq!(r.force, Vec3::ZERO);
    }

    #[test]
    fn floor_pushes_overlapping_particle_up() {
        let pair = MaterialPair { spring_normal: 10.0, ..unit_pair() };
        let wall = Wall::plane(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0).unwrap();
        let p = body(Vec3::new(0.0, 0.0, 0.9), Vec3::ZERO);
        let r = wall_pair_force(&p, &wall, &pair, Vec3::ZERO, 1e-3).unwrap();
        let k_n = 10.0 * (0.1f64 * 1.0).sqrt();
        assert_relative_eq!(r.force.z, k_n * 0.1, max_relative = 1e-12);
        assert_eq!((r.force.x, r.force.y), (0.0, 0.0));
    }

    #[test]
    fn wall_matches_giant_particle_oracle() {
        let pair = MaterialPair {
            spring_tangential: 4.0,
            spring_normal: 9.0,
            restitution: 0.4,
            friction: 0.3,
        };
        let wall = Wall::plane(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0).unwrap();
        let p = BodyState {
            position: Vec3::new(0.0, 0.0, 0.93),
            velocity: Vec3::new(0.3, -0.1, -0.5),
            angular_velocity: Vec3::new(0.2, 0.1, 0.0),
            radius: 1.0,
            mass: 2.0,
        };
        let direct = wall_pair_force(&p, &wall, &pair, Vec3::ZERO, 1e-3).unwrap();

        let big_r = 1e6;
        let giant = BodyState {
            position: Vec3::new(0.0, 0.0, -big_r),
            velocity: Vec3::ZERO,
            angular_velocity: Vec3::ZERO,
            radius: big_r,
            mass: f64::INFINITY,
        };
        let oracle = practical_pair_force(&p, &giant, &pair, Vec3::ZERO, 1e-3).unwrap();
        assert_relative_eq!(direct.force.x, oracle.force.x, max_relative = 1e-3);
        assert_relative_eq!(direct.force.y, oracle.force.y, max_relative = 1e-3);
        assert_relative_eq!(direct.force.z, oracle.force.z, max_relative = 1e-3);
    }

    #[test]
    fn deep_penetration_behind_plane_is_tunneling() {
        let wall = Wall::plane(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0).unwrap();
        let p = body(Vec3::new(0.0, 0.0, -1.5), Vec3::ZERO);
        assert!(wall_pair_force(&p, &wall, &unit_pair(), Vec3::ZERO, 1e-3).is_err());
    }

    #[test]
    fn patch_contact_acts_double_sided_and_ends_at_edges() {
        let extent = WallExtent { axis_u: 0, axis_v: 1, half_u: 1.0, half_v: 1.0 };
        let wall = Wall::patch(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0, extent).unwrap();

        let above = wall_contact_geometry(Vec3::new(0.5, 0.0, 0.05), 0.1, &wall).unwrap();
        assert!(above.contact);
        assert_eq!(above.normal, Vec3::new(0.0, 0.0, -1.0));

        let below = wall_contact_geometry(Vec3::new(0.5, 0.0, -0.05), 0.1, &wall).unwrap();
        assert!(below.contact);
        assert_eq!(below.normal, Vec3::new(0.0, 0.0, 1.0));

        let past_edge = wall_contact_geometry(Vec3::new(1.5, 0.0, 0.0), 0.1, &wall).unwrap();
        assert!(!past_edge.contact);

        let near_edge = wall_contact_geometry(Vec3::new(1.05, 0.0, 0.0), 0.1, &wall).unwrap();
        assert!(near_edge.contact);
        assert_eq!(near_edge.normal, Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn forces_stay_continuous_at_contact_onset() {
        let i = body(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0));
        let mut j = body(Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO);
        j.position.x = 2.0 - 1e-15;
        let pair = MaterialPair {
            spring_tangential: 1.0,
            spring_normal: 1.0,
            restitution: 1.0,
            friction: 0.5,
        };
        let r = practical_pair_force(&i, &j, &pair, Vec3::ZERO, 1e-3).unwrap();
        assert!(r.force.norm() < 1e-3, "force must fade to zero at onset");
    }

    #[test]
    fn pair_keys_are_order_insensitive() {
        assert_eq!(PairKey::particles(7, 3), PairKey::particles(3, 7));
        assert_ne!(PairKey::particles(1, 2), PairKey::wall(1, 2));
    }

    #[test]
    fn prune_to_empty_contact_set_clears_history() {
        let mut h = TangentialHistory::new();
        h.insert(PairKey::particles(0, 1), Vec3::new(1.0, 0.0, 0.0));
        let pruned = history_prune(&h, []);
        assert!(pruned.is_empty());
    }

    #[test]
    fn prune_preserves_persisting_entries_verbatim() {
        let mut h = TangentialHistory::new();
        let key = PairKey::particles(2, 5);
        let value = Vec3::new(0.25, -0.5, 0.125);
        h.insert(key, value);
        h.insert(PairKey::particles(0, 1), Vec3::new(9.0, 9.0, 9.0));
        let pruned = history_prune(&h, [key]);
        assert_eq!(pruned.get(key), value);
        assert_eq!(pruned.len(), 1);
    }

    #[test]
    fn recontact_after_separation_starts_fresh() {
        let key = PairKey::particles(0, 1);
        let mut h = TangentialHistory::new();
        h.insert(key, Vec3::new(1.0, 1.0, 1.0));
        let separated = history_prune(&h, []);
        let recontacted = history_prune(&separated, [key]);
        assert_eq!(recontacted.get(key), Vec3::ZERO);
        assert!(recontacted.contains(key));
    }
}
