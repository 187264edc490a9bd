use serde::{Deserialize, Serialize};

use super::Nanos;

/// Delay and accuracy bounds that drive both planning and simulation.
///
/// Lower bounds of the controller-to-switch and network delays are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParameters {
    /// Controller-to-switch delay bound, switch install time included.
    pub d_c: Nanos,
    /// End-to-end network delay bound.
    pub d_n: Nanos,
    /// Largest gap between two consecutive controller messages.
    pub delta_msg: Nanos,
    /// Scheduling error: a command due at `T` runs somewhere in `[T, T + delta_sched]`.
    pub delta_sched: Nanos,
    /// Lead time between sending timed commands and the first scheduled
    /// instant. `None` derives it from the message count, see
    /// [`SystemParameters::setup_lead`].
    #[serde(default)]
    pub t_su: Option<Nanos>,
}

impl SystemParameters {
    /// The 99.9th percentile values measured on the leaf-spine testbed:
    /// Dn = 0.262 ms, Dc = 4.865 ms, δ = 1.297 ms, Δ = 5.24 ms.
    pub const fn testbed() -> Self {
        SystemParameters {
            d_c: Nanos::from_micros(4_865),
            d_n: Nanos::from_micros(262),
            delta_msg: Nanos::from_micros(5_240),
            delta_sched: Nanos::from_micros(1_297),
            t_su: None,
        }
    }

    /// Setup lead for a timed procedure that sends `messages` commands.
    /// Defaults to `Dc + Δ·messages`, which lets every command arrive
    /// before the first scheduled instant when delays respect the bounds.
    pub fn setup_lead(&self, messages: usize) -> Nanos {
        self.t_su
            .unwrap_or_else(|| self.d_c + self.delta_msg * messages as u64)
    }

    pub fn with_delta_sched(mut self, delta: Nanos) -> Self {
        self.delta_sched = delta;
        self
    }

    pub fn with_d_c(mut self, d_c: Nanos) -> Self {
        self.d_c = d_c;
        self
    }

    pub fn with_d_n(mut self, d_n: Nanos) -> Self {
        self.d_n = d_n;
        self
    }

    pub fn with_delta_msg(mut self, delta: Nanos) -> Self {
        self.delta_msg = delta;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_setup_lead_covers_all_messages() {
        let p = SystemParameters::testbed();
        assert_eq!(p.setup_lead(32), Nanos(4_865_000 + 32 * 5_240_000));
        let fixed = SystemParameters {
            t_su: Some(Nanos::from_millis(1)),
            ..p
        };
        assert_eq!(fixed.setup_lead(32), Nanos::from_millis(1));
    }
}
