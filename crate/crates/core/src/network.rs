//! Distributed formation control over a directed tree rooted at vehicle 0.
//!
//! Every follower sees only its parent: the parent's pose, its commanded
//! `(v, ω)` and their rates. From these it builds a virtual leader on its
//! adjoint orbit `g_parent · ḡ` and tracks it with the two-stage controller.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    adjoint_velocity, desired_config, heading_offset, heading_offset_rate, FormationOffset,
};
use crate::kinematics::{Input, LeaderSample, VehicleState};
use crate::se2::{Pose, Twist};
use crate::tracking::{Command, Reference, Saturation, TrackingController, TrackingGains};

/// One parent → child link with the child's offset in the parent's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub offset: FormationOffset,
}

/// Unvalidated tree description: `n_vehicles` nodes `0..n_vehicles`, root 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectedTree {
    pub n_vehicles: usize,
    pub edges: Vec<Edge>,
}

impl DirectedTree {
    pub fn chain(offsets: &[FormationOffset]) -> Self {
        DirectedTree {
            n_vehicles: offsets.len() + 1,
            edges: offsets
                .iter()
                .enumerate()
                .map(|(k, &offset)| Edge {
                    parent: k,
                    child: k + 1,
                    offset,
                })
                .collect(),
        }
    }

    pub fn star(offsets: &[FormationOffset]) -> Self {
        DirectedTree {
            n_vehicles: offsets.len() + 1,
            edges: offsets
                .iter()
                .enumerate()
                .map(|(k, &offset)| Edge {
                    parent: 0,
                    child: k + 1,
                    offset,
                })
                .collect(),
        }
    }
}

/// A tree that passed [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedTree {
    parent: Vec<Option<usize>>,
    offset: Vec<FormationOffset>,
    depth: Vec<usize>,
    /// Breadth-first order from the root; every parent precedes its children.
    order: Vec<usize>,
}

/// Checks that every non-root node has exactly one parent, that there are no
/// cycles, and that every node is reachable from 0.
pub fn validate_tree(tree: &DirectedTree) -> Result<ValidatedTree> {
    let n = tree.n_vehicles;
    if n == 0 {
        return Err(Error::Topology {
            node: 0,
            reason: "tree has no vehicles".into(),
        });
    }
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut offset = vec![FormationOffset::default(); n];
    for e in &tree.edges {
        for node in [e.parent, e.child] {
            if node >= n {
                return Err(Error::Topology {
                    node,
                    reason: format!("index out of range for {n} vehicles"),
                });
            }
        }
        if e.child == 0 {
            return Err(Error::Topology {
                node: 0,
                reason: "the root cannot have a parent".into(),
            });
        }
        if e.child == e.parent {
            return Err(Error::Topology {
                node: e.child,
                reason: "self loop".into(),
            });
        }
        if let Some(p) = parent[e.child] {
            return Err(Error::Topology {
                node: e.child,
                reason: format!("multiple parents ({p} and {})", e.parent),
            });
        }
        parent[e.child] = Some(e.parent);
        offset[e.child] = e.offset;
    }

    // Walk each node towards the root; revisiting a node on the walk is a cycle.
    for start in 1..n {
        let mut seen = vec![false; n];
        let mut node = start;
        loop {
            if seen[node] {
                return Err(Error::Topology {
                    node,
                    reason: "cycle".into(),
                });
            }
            seen[node] = true;
            match parent[node] {
                Some(p) => node = p,
                None if node == 0 => break,
                None => {
                    return Err(Error::Topology {
                        node: start,
                        reason: format!("not reachable from vehicle 0 (orphan at {node})"),
                    })
                }
            }
        }
    }

    let mut children = vec![Vec::new(); n];
    for (child, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(child);
        }
    }
    let mut depth = vec![0; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        order.push(node);
        for &c in &children[node] {
            depth[c] = depth[node] + 1;
            queue.push_back(c);
        }
    }

    Ok(ValidatedTree {
        parent,
        offset,
        depth,
        order,
    })
}

impl ValidatedTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Offset of `node` in its parent's frame (zero for the root).
    pub fn offset(&self, node: usize) -> FormationOffset {
        self.offset[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Nodes from `node` up to and including the root.
    pub fn path_to_root(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path
    }

    /// Desired configuration of every node relative to the root, and the speed
    /// each node has on its orbit, for root speeds `(v0, omega0)`.
    ///
    /// Chains `ḡ₀ᵢ = ḡ₀ⱼ ḡⱼᵢ` down the tree, each edge's heading offset taken from
    /// the parent's orbit speeds.
    pub fn resolve(&self, v0: f64, omega0: f64) -> Result<Vec<(Pose, Twist)>> {
        let mut out = vec![(Pose::identity(), Twist::unicycle(v0, omega0)); self.len()];
        for &node in &self.order[1..] {
            let p = self.parent[node].expect("non-root node has a parent");
            let (parent_config, parent_twist) = out[p];
            let offset = self.offset[node];
            let theta_bar = heading_offset(&offset, parent_twist.vx, parent_twist.omega)?;
            let edge = desired_config(&offset, theta_bar);
            out[node] = (
                parent_config.compose(&edge),
                adjoint_velocity(&edge, &parent_twist, 0.0)?,
            );
        }
        Ok(out)
    }

    /// Each follower's offset expressed in the root frame (entry 0 is the root).
    pub fn resolved_offsets(&self, v0: f64, omega0: f64) -> Result<Vec<FormationOffset>> {
        Ok(self
            .resolve(v0, omega0)?
            .iter()
            .map(|(g, _)| FormationOffset::new(g.x(), g.y()))
            .collect())
    }
}

/// What a parent communicates to its children.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParentSignal {
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
    pub dv: f64,
    pub domega: f64,
}

impl ParentSignal {
    pub fn twist(&self) -> Twist {
        Twist::unicycle(self.v, self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualLeaderState {
    /// Point on the child's adjoint orbit, `g_parent · ḡ`.
    pub pose: Pose,
    /// `(ω̃, ṽ, 0)`.
    pub twist: Twist,
    /// `ṽ̇`.
    pub dv: f64,
    /// Parent's `ω̇`; the second derivative of the heading offset is not
    /// included (it vanishes when the parent's speed ratio is constant).
    pub domega: f64,
    pub heading_offset: f64,
    pub heading_offset_rate: f64,
}

/// Builds the child's virtual leader from its parent's state and the edge offset.
pub fn virtual_leader(
    parent: &ParentSignal,
    offset: &FormationOffset,
) -> Result<VirtualLeaderState> {
    let theta_bar = heading_offset(offset, parent.v, parent.omega)?;
    let rate = heading_offset_rate(offset, parent.v, parent.omega, parent.dv, parent.domega)?;
    let config = desired_config(offset, theta_bar);
    let twist = adjoint_velocity(&config, &parent.twist(), rate)?;
    let (s, c) = theta_bar.sin_cos();
    // d/dt [(v - ω ȳ) cos θ̄ + ω x̄ sin θ̄]; the θ̄̇ terms multiply the lateral speed, which is zero.
    let dv = (parent.dv - parent.domega * offset.y_bar) * c + parent.domega * offset.x_bar * s;
    Ok(VirtualLeaderState {
        pose: parent.pose.compose(&config),
        twist,
        dv,
        domega: parent.domega,
        heading_offset: theta_bar,
        heading_offset_rate: rate,
    })
}

/// Feed-forward term of the follower's virtual control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedforward {
    /// The virtual leader's own velocity `ṽ R̃ e₁`. Converges onto the orbit.
    #[default]
    VirtualLeader,
    /// The parent's velocity `v_j R_j e₁`. Leaves a steady offset from the
    /// orbit whenever the edge offset is non-zero.
    Parent,
}

/// Output of one follower for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerOutput {
    pub command: Command,
    pub virtual_leader: VirtualLeaderState,
}

/// Control law of a single follower. Its inputs are its own state, its
/// parent's signal and the edge offset, nothing else.
#[derive(Debug, Clone)]
pub struct FollowerController {
    pub offset: FormationOffset,
    pub feedforward: Feedforward,
    tracker: TrackingController,
}

impl FollowerController {
    pub fn new(
        offset: FormationOffset,
        tracker: TrackingController,
        feedforward: Feedforward,
    ) -> Self {
        FollowerController {
            offset,
            feedforward,
            tracker,
        }
    }

    pub fn control(
        &mut self,
        state: &VehicleState,
        parent: &ParentSignal,
    ) -> Result<FollowerOutput> {
        let vl = virtual_leader(parent, &self.offset)?;
        let mut reference = Reference::unicycle(&vl.pose, vl.twist.vx, vl.twist.omega, vl.dv);
        if self.feedforward == Feedforward::Parent {
            reference.heading = parent.pose.rotation;
            reference.speed = parent.v;
            reference.speed_rate = parent.dv;
            reference.turn_rate = parent.omega;
        }
        let command = self.tracker.compute(state, &reference)?;
        Ok(FollowerOutput {
            command,
            virtual_leader: vl,
        })
    }
}

/// Everything needed to command one follower.
pub fn follower_control(
    controller: &mut FollowerController,
    state: &VehicleState,
    parent: &ParentSignal,
) -> Result<FollowerOutput> {
    controller.control(state, parent)
}

/// Per-node result of one synchronous sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCommand {
    pub input: Input,
    /// `None` for the root.
    pub follower: Option<FollowerOutput>,
}

/// The whole tree of controllers, swept root-first each sample.
#[derive(Debug, Clone)]
pub struct Formation {
    tree: ValidatedTree,
    followers: Vec<Option<FollowerController>>,
    last_omega: Vec<Option<f64>>,
    step: f64,
}

impl Formation {
    pub fn new(
        tree: ValidatedTree,
        gains: TrackingGains,
        saturation: Saturation,
        hold_on_degenerate: bool,
        feedforward: Feedforward,
        step: f64,
    ) -> Self {
        let followers = (0..tree.len())
            .map(|node| {
                tree.parent(node).map(|_| {
                    FollowerController::new(
                        tree.offset(node),
                        TrackingController::new(gains, saturation, hold_on_degenerate),
                        feedforward,
                    )
                })
            })
            .collect();
        let n = tree.len();
        Formation {
            tree,
            followers,
            last_omega: vec![None; n],
            step,
        }
    }

    pub fn tree(&self) -> &ValidatedTree {
        &self.tree
    }

    /// Commands for every vehicle at one instant. `states[0]` is the leader.
    ///
    /// A follower's `ω̇` is reported to its children as the backward difference
    /// of its commanded `ω` over the last step.
    pub fn command(
        &mut self,
        states: &[VehicleState],
        leader: &LeaderSample,
    ) -> Result<Vec<NodeCommand>> {
        let n = self.tree.len();
        let mut signals = vec![ParentSignal::default(); n];
        let mut out = vec![
            NodeCommand {
                input: Input::default(),
                follower: None,
            };
            n
        ];
        for &node in self.tree.order() {
            match self.tree.parent(node) {
                None => {
                    signals[node] = ParentSignal {
                        pose: states[node].pose,
                        v: leader.v,
                        omega: leader.omega,
                        dv: leader.dv,
                        domega: leader.domega,
                    };
                    out[node].input = Input::new(leader.v, leader.omega);
                }
                Some(p) => {
                    let controller = self.followers[node].as_mut().expect("follower controller");
                    let output = controller.control(&states[node], &signals[p])?;
                    let input = output.command.input;
                    let domega = self.last_omega[node]
                        .map(|prev| (input.omega - prev) / self.step)
                        .unwrap_or(0.0);
                    self.last_omega[node] = Some(input.omega);
                    signals[node] = ParentSignal {
                        pose: states[node].pose,
                        v: input.v,
                        omega: input.omega,
                        dv: output.command.dv,
                        domega,
                    };
                    out[node] = NodeCommand {
                        input,
                        follower: Some(output),
                    };
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se2::Pose;

    fn bundled_offsets() -> [FormationOffset; 2] {
        [
            FormationOffset::new(-0.1, -0.1),
            FormationOffset::new(0.0, 0.2),
        ]
    }

    #[test]
    fn chain_is_valid() {
        let t = validate_tree(&DirectedTree::chain(&bundled_offsets())).unwrap();
        assert_eq!(t.order(), &[0, 1, 2]);
        assert_eq!(t.max_depth(), 2);
        assert_eq!(t.path_to_root(2), vec![2, 1, 0]);
    }

    #[test]
    fn cycle_is_rejected() {
        let o = FormationOffset::new(0.0, 0.1);
        let tree = DirectedTree {
            n_vehicles: 3,
            edges: vec![
                Edge {
                    parent: 1,
                    child: 2,
                    offset: o,
                },
                Edge {
                    parent: 2,
                    child: 1,
                    offset: o,
                },
            ],
        };
        let err = validate_tree(&tree).unwrap_err();
        assert!(
            matches!(err, Error::Topology { ref reason, .. } if reason == "cycle"),
            "{err}"
        );
    }

    #[test]
    fn multiple_parents_and_orphans() {
        let o = FormationOffset::new(0.0, 0.1);
        let two = DirectedTree {
            n_vehicles: 3,
            edges: vec![
                Edge {
                    parent: 0,
                    child: 1,
                    offset: o,
                },
                Edge {
                    parent: 0,
                    child: 2,
                    offset: o,
                },
                Edge {
                    parent: 1,
                    child: 2,
                    offset: o,
                },
            ],
        };
        assert!(matches!(
            validate_tree(&two),
            Err(Error::Topology { node: 2, .. })
        ));
        let orphan = DirectedTree {
            n_vehicles: 3,
            edges: vec![Edge {
                parent: 0,
                child: 1,
                offset: o,
            }],
        };
        assert!(matches!(
            validate_tree(&orphan),
            Err(Error::Topology { node: 2, .. })
        ));
        let root_child = DirectedTree {
            n_vehicles: 2,
            edges: vec![Edge {
                parent: 1,
                child: 0,
                offset: o,
            }],
        };
        assert!(validate_tree(&root_child).is_err());
    }

    #[test]
    fn star_resolves_to_edge_offsets() {
        let offs = [
            FormationOffset::new(-0.1, 0.2),
            FormationOffset::new(0.3, -0.1),
            FormationOffset::new(0.0, 0.5),
        ];
        let t = validate_tree(&DirectedTree::star(&offs)).unwrap();
        let r = t.resolved_offsets(0.06, 0.05).unwrap();
        for (k, o) in offs.iter().enumerate() {
            assert_eq!(r[k + 1], *o);
        }
    }

    #[test]
    fn chain_resolution_matches_composition() {
        let t = validate_tree(&DirectedTree::chain(&bundled_offsets())).unwrap();
        let r = t.resolve(0.06, 0.05).unwrap();
        assert!((r[2].0.x() - -0.084_660_700_223_052_6).abs() < 1e-15);
        assert!((r[2].0.y() - 0.099_410_897_100_316_34).abs() < 1e-15);
        assert!((r[1].1.vx - 0.065_192_024_052_026_5).abs() < 1e-15);
        assert!((r[2].1.vx - 0.055_192_024_052_026_49).abs() < 1e-15);
    }

    #[test]
    fn zero_offset_virtual_leader_is_parent() {
        let parent = ParentSignal {
            pose: Pose::new(0.3, 1.0, -1.0),
            v: 0.06,
            omega: 0.05,
            dv: 0.01,
            domega: -0.02,
        };
        let vl = virtual_leader(&parent, &FormationOffset::default()).unwrap();
        assert_eq!(vl.pose, parent.pose);
        assert_eq!(vl.twist, parent.twist());
        assert!((vl.dv - parent.dv).abs() < 1e-18);
        assert_eq!(vl.heading_offset, 0.0);
    }

    #[test]
    fn bundled_edges_virtual_speeds() {
        let leader = ParentSignal {
            pose: Pose::new(0.9, 0.5, 1.1),
            v: 0.06,
            omega: 0.05,
            ..Default::default()
        };
        let [o1, o2] = bundled_offsets();
        let vl1 = virtual_leader(&leader, &o1).unwrap();
        assert!((vl1.twist.vx - 0.065_192_024_052_026_5).abs() < 1e-15);
        assert_eq!(vl1.twist.omega, 0.05);
        let on_orbit = ParentSignal {
            pose: vl1.pose,
            v: vl1.twist.vx,
            omega: vl1.twist.omega,
            ..Default::default()
        };
        let vl2 = virtual_leader(&on_orbit, &o2).unwrap();
        assert_eq!(vl2.heading_offset, 0.0);
        assert!((vl2.twist.vx - 0.055_192_024_052_026_49).abs() < 1e-15);
    }

    #[test]
    fn virtual_leader_speed_rate_matches_finite_difference() {
        let o = FormationOffset::new(-0.2, 0.15);
        let v = |t: f64| 0.06 + 0.01 * (0.4 * t).sin();
        let w = |t: f64| 0.05 + 0.03 * (0.25 * t).cos();
        let sig = |t: f64| ParentSignal {
            pose: Pose::identity(),
            v: v(t),
            omega: w(t),
            dv: 0.004 * (0.4 * t).cos(),
            domega: -0.0075 * (0.25 * t).sin(),
        };
        let h = 1e-5;
        for &t in &[0.0, 2.0, 9.5] {
            let vl = virtual_leader(&sig(t), &o).unwrap();
            let fd = (virtual_leader(&sig(t + h), &o).unwrap().twist.vx
                - virtual_leader(&sig(t - h), &o).unwrap().twist.vx)
                / (2.0 * h);
            assert!((vl.dv - fd).abs() < 1e-9);
        }
    }

    #[test]
    fn follower_on_orbit_holds_still() {
        let leader = ParentSignal {
            pose: Pose::new(0.2, 0.0, 0.0),
            v: 0.06,
            omega: 0.05,
            ..Default::default()
        };
        let offset = FormationOffset::new(-0.1, -0.1);
        let vl = virtual_leader(&leader, &offset).unwrap();
        let gains = TrackingGains::new(0.3, 0.3).unwrap();
        let mut c = FollowerController::new(
            offset,
            TrackingController::new(gains, Saturation::Tanh, true),
            Feedforward::VirtualLeader,
        );
        let out = follower_control(&mut c, &VehicleState::new(vl.pose), &leader).unwrap();
        assert!((out.command.input.v - vl.twist.vx).abs() < 1e-15);
        assert!((out.command.input.omega - 0.05).abs() < 1e-15);
        assert!(out.command.error.p01.norm() < 1e-15);

        // The parent feed-forward does not even hold the equilibrium.
        let mut p = FollowerController::new(
            offset,
            TrackingController::new(gains, Saturation::Tanh, true),
            Feedforward::Parent,
        );
        let out = p.control(&VehicleState::new(vl.pose), &leader).unwrap();
        assert!((out.command.input.v - 0.06).abs() < 1e-15);
    }
}
