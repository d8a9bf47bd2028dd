//! Pressure-driven state diagrams.
//!
//! All units sharing a depth snap together, so an actuator with `n` distinct
//! depths has `2^n` stable panel states. Raising the pressure past `p+` of a
//! depth pops its panels out; lowering it past `p-` pulls them back in. Since
//! `p+` grows and `p-` shrinks with depth, thresholds are always met in
//! depth order, which fixes which transitions exist.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::design::{ActuatorDesign, Depth};

/// One bit per distinct depth of a design, smallest depth first. `true` = popped out (s1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PanelState {
    mask: u8,
    width: u8,
}

impl PanelState {
    pub fn all_folded(width: usize) -> PanelState {
        assert!(width <= 3, "at most three distinct depths");
        PanelState {
            mask: 0,
            width: width as u8,
        }
    }

    pub fn all_popped(width: usize) -> PanelState {
        let mut s = Self::all_folded(width);
        s.mask = (1u8 << width) - 1;
        s
    }

    pub fn from_bits(bits: &[bool]) -> PanelState {
        let mut s = Self::all_folded(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s = s.with(i, b);
        }
        s
    }

    /// Parses `s01`, `01`, or `s` (no bistable depths).
    pub fn parse(text: &str, width: usize) -> Option<PanelState> {
        let bits = text.strip_prefix('s').unwrap_or(text);
        let bits = if bits == "-" { "" } else { bits };
        if bits.len() != width {
            return None;
        }
        let parsed: Option<Vec<bool>> = bits
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        parsed.map(|b| Self::from_bits(&b))
    }

    pub fn width(self) -> usize {
        usize::from(self.width)
    }

    pub fn get(self, i: usize) -> bool {
        debug_assert!(i < self.width());
        self.mask >> i & 1 == 1
    }

    pub fn with(self, i: usize, popped: bool) -> PanelState {
        debug_assert!(i < self.width());
        let mask = if popped {
            self.mask | 1 << i
        } else {
            self.mask & !(1 << i)
        };
        PanelState { mask, ..self }
    }

    pub fn bits(self) -> Vec<bool> {
        (0..self.width()).map(|i| self.get(i)).collect()
    }

    /// Bit string, smallest depth first; `-` when the design has no bistable units.
    pub fn bit_string(self) -> String {
        if self.width == 0 {
            return "-".into();
        }
        (0..self.width())
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }

    /// Every state of the given width, in bit-string order.
    pub fn all(width: usize) -> Vec<PanelState> {
        let mut states: Vec<PanelState> = (0..1u8 << width)
            .map(|mask| PanelState {
                mask,
                width: width as u8,
            })
            .collect();
        states.sort_by_key(|s| s.bit_string());
        states
    }
}

impl fmt::Display for PanelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 0 {
            f.write_str("s")
        } else {
            write!(f, "s{}", self.bit_string())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Snap out while inflating past `p+`.
    Inflate,
    /// Snap back while deflating past `p-`.
    Deflate,
}

/// A snapping transition of the diagram.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub from: PanelState,
    pub to: PanelState,
    /// Index into [`StateDiagram::depths`] of the depth that snaps.
    pub bit: usize,
    pub depth: Depth,
    pub direction: Direction,
    pub pressure_kpa: f64,
}

impl Transition {
    pub fn trigger_label(&self) -> String {
        match self.direction {
            Direction::Inflate => format!("p{}+", self.depth),
            Direction::Deflate => format!("p{}-", self.depth),
        }
    }
}

/// Where a diagram node comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NodeKind {
    /// Zero-pressure stable state.
    Stable,
    /// Configuration just before the transition with this index snaps.
    PreSnap { transition: usize },
    /// Fully popped state at the top of the covered pressure range.
    MaxInflation,
    /// Fully folded state at the bottom of the covered pressure range.
    MaxDeflation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PressureRegime {
    Negative,
    Zero,
    Positive,
}

impl PressureRegime {
    pub fn of(pressure: f64) -> PressureRegime {
        if pressure > 0.0 {
            PressureRegime::Positive
        } else if pressure < 0.0 {
            PressureRegime::Negative
        } else {
            PressureRegime::Zero
        }
    }
}

/// A (panel state, pressure keypoint) pair at which the actuator configuration is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagramNode {
    pub state: PanelState,
    pub pressure_kpa: f64,
    pub kind: NodeKind,
}

impl DiagramNode {
    pub fn regime(&self) -> PressureRegime {
        PressureRegime::of(self.pressure_kpa)
    }

    /// Short label such as `s01@0`, `s11@p3-` or `s00@max-`.
    pub fn label(&self, diagram: &StateDiagram) -> String {
        match self.kind {
            NodeKind::Stable => format!("{}@0", self.state),
            NodeKind::PreSnap { transition } => {
                format!("{}@{}", self.state, diagram.transitions[transition].trigger_label())
            }
            NodeKind::MaxInflation => format!("{}@max+", self.state),
            NodeKind::MaxDeflation => format!("{}@max-", self.state),
        }
    }
}

/// State diagram of a design under a calibration.
///
/// Nodes: the `2^n` stable states, one pre-snap configuration per transition,
/// and the two range extremes, `3 * 2^n` in total.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDiagram {
    pub depths: Vec<Depth>,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub pressure_range: (f64, f64),
    pub stable_states: Vec<PanelState>,
    pub transitions: Vec<Transition>,
    pub nodes: Vec<DiagramNode>,
}

impl StateDiagram {
    pub fn for_depths(depths: &[Depth], calibration: &Calibration) -> StateDiagram {
        let width = depths.len();
        let p_plus: Vec<f64> = depths.iter().map(|&d| calibration.thresholds(d).p_plus_kpa).collect();
        let p_minus: Vec<f64> = depths.iter().map(|&d| calibration.thresholds(d).p_minus_kpa).collect();
        let stable_states = PanelState::all(width);

        // Inflating from a state, the first threshold met is that of the smallest
        // folded depth; deflating, that of the smallest popped depth.
        let mut transitions = Vec::new();
        for bit in 0..width {
            for &from in &stable_states {
                if !from.get(bit) && (0..bit).all(|j| from.get(j)) {
                    transitions.push(Transition {
                        from,
                        to: from.with(bit, true),
                        bit,
                        depth: depths[bit],
                        direction: Direction::Inflate,
                        pressure_kpa: p_plus[bit],
                    });
                }
            }
        }
        for bit in 0..width {
            for &from in &stable_states {
                if from.get(bit) && (0..bit).all(|j| !from.get(j)) {
                    transitions.push(Transition {
                        from,
                        to: from.with(bit, false),
                        bit,
                        depth: depths[bit],
                        direction: Direction::Deflate,
                        pressure_kpa: p_minus[bit],
                    });
                }
            }
        }

        let pressure_range = calibration.pressure_range();
        let mut nodes: Vec<DiagramNode> = stable_states
            .iter()
            .map(|&state| DiagramNode {
                state,
                pressure_kpa: 0.0,
                kind: NodeKind::Stable,
            })
            .collect();
        nodes.extend(transitions.iter().enumerate().map(|(i, t)| DiagramNode {
            state: t.from,
            pressure_kpa: t.pressure_kpa,
            kind: NodeKind::PreSnap { transition: i },
        }));
        nodes.push(DiagramNode {
            state: PanelState::all_popped(width),
            pressure_kpa: pressure_range.1,
            kind: NodeKind::MaxInflation,
        });
        nodes.push(DiagramNode {
            state: PanelState::all_folded(width),
            pressure_kpa: pressure_range.0,
            kind: NodeKind::MaxDeflation,
        });

        StateDiagram {
            depths: depths.to_vec(),
            p_plus,
            p_minus,
            pressure_range,
            stable_states,
            transitions,
            nodes,
        }
    }

    pub fn width(&self) -> usize {
        self.depths.len()
    }

    /// Bit index of a depth in this diagram's states.
    pub fn bit_of(&self, depth: Depth) -> Option<usize> {
        self.depths.iter().position(|&d| d == depth)
    }

    /// Transitions that fire, in order, when pressure moves monotonically from
    /// `from_kpa` to `to_kpa` starting in `state`. Snap-out needs the pressure to
    /// exceed `p+`; snap-back needs it to drop below `p-`.
    pub fn crossings(&self, state: PanelState, from_kpa: f64, to_kpa: f64) -> Vec<Transition> {
        let mut fired = Vec::new();
        let mut s = state;
        if to_kpa > from_kpa {
            for bit in 0..self.width() {
                let thr = self.p_plus[bit];
                if !s.get(bit) && from_kpa <= thr && thr < to_kpa {
                    let t = self.transition(s, bit, Direction::Inflate);
                    s = t.to;
                    fired.push(t);
                }
            }
        } else if to_kpa < from_kpa {
            for bit in 0..self.width() {
                let thr = self.p_minus[bit];
                if s.get(bit) && to_kpa < thr && thr <= from_kpa {
                    let t = self.transition(s, bit, Direction::Deflate);
                    s = t.to;
                    fired.push(t);
                }
            }
        }
        fired
    }

    fn transition(&self, from: PanelState, bit: usize, direction: Direction) -> Transition {
        Transition {
            from,
            to: from.with(bit, direction == Direction::Inflate),
            bit,
            depth: self.depths[bit],
            direction,
            pressure_kpa: match direction {
                Direction::Inflate => self.p_plus[bit],
                Direction::Deflate => self.p_minus[bit],
            },
        }
    }

    /// States reachable from `start` by any sequence of pressure extrema.
    pub fn reachable_from(&self, start: PanelState) -> Vec<PanelState> {
        let mut seen = vec![start];
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for t in self.transitions.iter().filter(|t| t.from == s) {
                if !seen.contains(&t.to) {
                    seen.push(t.to);
                    queue.push_back(t.to);
                }
            }
        }
        seen.sort_by_key(|s| s.bit_string());
        seen
    }
}

/// Builds the complete state diagram of a design.
pub fn build_state_diagram(design: &ActuatorDesign, calibration: &Calibration) -> StateDiagram {
    StateDiagram::for_depths(&design.depths(), calibration)
}
