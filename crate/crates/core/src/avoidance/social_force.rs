use super::SocialForceParams;
use crate::agent::{pair_direction, AgentState};
use crate::geometry::{ObstacleSet, Vec2};

const COINCIDENT: f64 = 1e-9;

/// One explicit Euler step of the social force model.
///
/// The driving term relaxes the velocity toward `v_pref` over `tau`; every
/// neighbor within `neighbor_dist` and every wall within the same distance
/// adds an exponential repulsion along the line of centers (or the wall
/// normal). Neighbors are summed in the order given.
pub fn social_force_velocity(
    agent: &AgentState,
    v_pref: Vec2,
    neighbors: &[&AgentState],
    obstacles: &ObstacleSet,
    params: &SocialForceParams,
    dt: f64,
) -> Vec2 {
    let mut force = (v_pref - agent.velocity) / params.tau;

    for other in neighbors {
        let offset = agent.position - other.position;
        let dist = offset.length();
        if dist > params.neighbor_dist {
            continue;
        }
        let normal = if dist < COINCIDENT {
            pair_direction(agent.id, other.id)
        } else {
            offset / dist
        };
        let strength = if other.is_robot() {
            params.a * params.robot_multiplier
        } else {
            params.a
        };
        let reach = agent.radius + other.radius;
        force += normal * (strength * ((reach - dist) / params.b).exp());
    }

    for seg in obstacles.segments() {
        let q = seg.closest_point(agent.position);
        let offset = agent.position - q;
        let dist = offset.length();
        if dist > params.neighbor_dist {
            continue;
        }
        let normal = if dist < COINCIDENT {
            (seg.b() - seg.a()).perp().normalized().expect("segments have length")
        } else {
            offset / dist
        };
        force += normal * (params.wall_a * ((agent.radius - dist) / params.wall_b).exp());
    }

    (agent.velocity + force * dt).clamp_length(agent.max_speed)
}
