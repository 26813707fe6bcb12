//! Per-device button interpretation.
//!
//! The proximal button alone clutches the arm, the distal button alone
//! requests vehicle mode, and both pressed together toggle the gripper.
//! A single press is held in a pending phase for the simultaneity window so
//! a chord is never mistaken for a clutch or vehicle request.

use serde::{Deserialize, Serialize};

use super::{Device, StylusSample, TeleopError, TeleopEvent};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ButtonTiming {
    /// Two presses this close together count as one chord, s.
    pub simultaneity_window: f64,
    /// Minimum spacing between gripper toggles, s.
    pub retoggle_debounce: f64,
}

impl Default for ButtonTiming {
    fn default() -> Self {
        Self {
            simultaneity_window: 0.150,
            retoggle_debounce: 0.250,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Button {
    Manip,
    Vehicle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    Idle,
    Pending { since: f64, first: Button },
    Clutch,
    Vehicle,
    /// Both buttons went down together; wait for both to come up.
    Chord,
    /// Ignore everything until both buttons are released.
    Latched,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceButtons {
    device: Device,
    phase: Phase,
    last_timestamp: Option<f64>,
    last_toggle: Option<f64>,
}

impl DeviceButtons {
    pub fn new(device: Device) -> Self {
        Self {
            device,
            phase: Phase::Idle,
            last_timestamp: None,
            last_toggle: None,
        }
    }

    pub fn device(&self) -> Device {
        self.device
    }

    pub fn clutched(&self) -> bool {
        self.phase == Phase::Clutch
    }

    /// The distal button alone is committed down on this device.
    pub fn vehicle_held(&self) -> bool {
        self.phase == Phase::Vehicle
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.last_timestamp
    }

    pub fn update(
        &mut self,
        sample: &StylusSample,
        timing: &ButtonTiming,
    ) -> Result<Vec<TeleopEvent>, TeleopError> {
        let t = sample.timestamp;
        if !t.is_finite() {
            return Err(TeleopError::NonFiniteTimestamp);
        }
        if let Some(last) = self.last_timestamp {
            if t < last {
                return Err(TeleopError::OutOfOrderTimestamp {
                    device: self.device,
                    last,
                    got: t,
                });
            }
        }
        self.last_timestamp = Some(t);

        let (m, v) = (sample.button_manip, sample.button_vehicle);
        let mut events = Vec::new();
        self.phase = match self.phase {
            Phase::Idle => match (m, v) {
                (true, true) => {
                    self.toggle(t, timing, &mut events);
                    Phase::Chord
                }
                (true, false) => Phase::Pending { since: t, first: Button::Manip },
                (false, true) => Phase::Pending { since: t, first: Button::Vehicle },
                (false, false) => Phase::Idle,
            },
            Phase::Pending { since, first } => {
                let within = t - since <= timing.simultaneity_window;
                let first_down = match first {
                    Button::Manip => m,
                    Button::Vehicle => v,
                };
                match (m, v) {
                    (true, true) if within => {
                        self.toggle(t, timing, &mut events);
                        Phase::Chord
                    }
                    (false, false) => Phase::Idle,
                    _ if !first_down => {
                        // The first button came up and the other went down.
                        let other = if m { Button::Manip } else { Button::Vehicle };
                        Phase::Pending { since: t, first: other }
                    }
                    _ if within => Phase::Pending { since, first },
                    _ => self.commit(first, &mut events),
                }
            }
            Phase::Clutch => {
                if m {
                    Phase::Clutch
                } else {
                    events.push(TeleopEvent::ClutchReleased(self.device));
                    if v {
                        Phase::Latched
                    } else {
                        Phase::Idle
                    }
                }
            }
            Phase::Vehicle => match (m, v) {
                (_, true) => Phase::Vehicle,
                (true, false) => Phase::Latched,
                (false, false) => Phase::Idle,
            },
            Phase::Chord | Phase::Latched => {
                if m || v {
                    self.phase
                } else {
                    Phase::Idle
                }
            }
        };
        Ok(events)
    }

    /// Drops any held interpretation, as if the buttons had been released,
    /// and ignores input until both buttons are seen up.
    pub fn force_release(&mut self) -> Vec<TeleopEvent> {
        let events = if self.phase == Phase::Clutch {
            vec![TeleopEvent::ClutchReleased(self.device)]
        } else {
            Vec::new()
        };
        if self.phase != Phase::Idle {
            self.phase = Phase::Latched;
        }
        events
    }

    fn commit(&mut self, first: Button, events: &mut Vec<TeleopEvent>) -> Phase {
        match first {
            Button::Manip => {
                events.push(TeleopEvent::ClutchEngaged(self.device));
                Phase::Clutch
            }
            Button::Vehicle => Phase::Vehicle,
        }
    }

    fn toggle(&mut self, t: f64, timing: &ButtonTiming, events: &mut Vec<TeleopEvent>) {
        let allowed = self
            .last_toggle
            .is_none_or(|last| t - last >= timing.retoggle_debounce);
        if allowed {
            self.last_toggle = Some(t);
            events.push(TeleopEvent::GripperToggled(self.device));
        }
    }
}
