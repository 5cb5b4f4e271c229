//! Switch-state enumeration, sector classification and per-sector state order.
//!
//! Sequences carry only the order of states within a switching period, not
//! dwell times.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::sim_switched::{u_nn_of_state, SwitchState};

/// The eight bridge states. Active states advance by 60 degrees from
/// `SV1` at angle zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceVector {
    Sv0,
    Sv1,
    Sv2,
    Sv3,
    Sv4,
    Sv5,
    Sv6,
    Sv7,
}

impl SpaceVector {
    pub const ALL: [SpaceVector; 8] = [
        SpaceVector::Sv0,
        SpaceVector::Sv1,
        SpaceVector::Sv2,
        SpaceVector::Sv3,
        SpaceVector::Sv4,
        SpaceVector::Sv5,
        SpaceVector::Sv6,
        SpaceVector::Sv7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn switch_state(self) -> SwitchState {
        let (a, b, c) = match self {
            SpaceVector::Sv0 => (false, false, false),
            SpaceVector::Sv1 => (true, false, false),
            SpaceVector::Sv2 => (true, true, false),
            SpaceVector::Sv3 => (false, true, false),
            SpaceVector::Sv4 => (false, true, true),
            SpaceVector::Sv5 => (false, false, true),
            SpaceVector::Sv6 => (true, false, true),
            SpaceVector::Sv7 => (true, true, true),
        };
        SwitchState::new(a, b, c)
    }

    fn active(k: usize) -> SpaceVector {
        Self::ALL[(k - 1) % 6 + 1]
    }
}

impl fmt::Display for SpaceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SV{}", self.index())
    }
}

pub fn enumerate_states() -> [(SpaceVector, SwitchState); 8] {
    SpaceVector::ALL.map(|v| (v, v.switch_state()))
}

/// Sector 1..=6 of `theta`, using half-open intervals `[k pi/3, (k+1) pi/3)`.
pub fn sector_of(theta: f64) -> u8 {
    let norm = theta.rem_euclid(2.0 * PI);
    ((norm / (PI / 3.0)).floor() as u8).min(5) + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorSequence {
    pub sector: u8,
    pub states: [SpaceVector; 8],
    pub u_nn_levels: [f64; 8],
}

/// Symmetric state sequence of one switching period in `sector`.
///
/// Each half starts from `SV0`, closes one switch at a time through the two
/// active states bounding the sector, and ends at `SV7`.
pub fn sector_sequence(sector: u8, u_dc: f64) -> Result<SectorSequence> {
    if !(1..=6).contains(&sector) {
        return Err(Error::Usage(format!(
            "sector must be in 1..=6, got {sector}"
        )));
    }
    let k = usize::from(sector);
    let (lead, trail) = (SpaceVector::active(k), SpaceVector::active(k + 1));
    // one closed switch comes before two
    let (first, second) = if lead.switch_state().closed_count() == 1 {
        (lead, trail)
    } else {
        (trail, lead)
    };
    let half = [SpaceVector::Sv0, first, second, SpaceVector::Sv7];
    let states = [
        half[0], half[1], half[2], half[3], half[3], half[2], half[1], half[0],
    ];
    let u_nn_levels = states.map(|v| u_nn_of_state(v.switch_state(), u_dc));
    Ok(SectorSequence {
        sector,
        states,
        u_nn_levels,
    })
}

pub fn all_sector_sequences(u_dc: f64) -> Vec<SectorSequence> {
    (1..=6)
        .map(|s| sector_sequence(s, u_dc).expect("sector in range"))
        .collect()
}
