//! Protocol time.

use std::time::Duration;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::domain::Minutes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Waits advance a counter only.
    #[default]
    Simulated,
    /// Waits block the thread.
    Real,
}

impl TimeMode {
    pub fn clock(self) -> Box<dyn Clock> {
        match self {
            TimeMode::Simulated => Box::new(VirtualClock::default()),
            TimeMode::Real => Box::new(RealClock::default()),
        }
    }
}

pub trait Clock: Send {
    fn sleep(&mut self, minutes: Minutes);
    /// Total protocol time spent waiting so far.
    fn elapsed(&self) -> Minutes;
}

#[derive(Debug, Clone)]
pub struct VirtualClock {
    elapsed: Ratio<u32>,
}

impl Default for VirtualClock {
    fn default() -> Self {
        VirtualClock { elapsed: Ratio::from_integer(0) }
    }
}

fn as_minutes(r: Ratio<u32>) -> Minutes {
    Minutes::from_seconds((r * 60).to_integer())
}

impl Clock for VirtualClock {
    fn sleep(&mut self, minutes: Minutes) {
        self.elapsed += minutes.ratio();
    }

    fn elapsed(&self) -> Minutes {
        as_minutes(self.elapsed)
    }
}

#[derive(Debug, Clone)]
pub struct RealClock {
    elapsed: Ratio<u32>,
}

impl Default for RealClock {
    fn default() -> Self {
        RealClock { elapsed: Ratio::from_integer(0) }
    }
}

impl Clock for RealClock {
    fn sleep(&mut self, minutes: Minutes) {
        std::thread::sleep(Duration::from_secs_f64(minutes.as_f64() * 60.0));
        self.elapsed += minutes.ratio();
    }

    fn elapsed(&self) -> Minutes {
        as_minutes(self.elapsed)
    }
}
