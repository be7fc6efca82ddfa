//! Failure mode, effects and criticality analysis.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::FaultClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Probability {
    Frequent,
    Probable,
    Remote,
    Unlikely,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Negligible,
    Marginal,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criticality {
    Insignificant,
    Minor,
    Major,
    High,
}

impl Probability {
    pub const ALL: [Probability; 4] = [
        Probability::Frequent,
        Probability::Probable,
        Probability::Remote,
        Probability::Unlikely,
    ];
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Negligible, Severity::Marginal, Severity::Critical];
}

macro_rules! display_debug {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Debug::fmt(self, f)
            }
        }
    )*};
}
display_debug!(Probability, Severity, Criticality);

/// Risk matrix lookup. Criticality grows with both probability and
/// severity; no cell is lower than a cell that is less likely or less
/// severe.
pub fn fmeca_criticality(p: Probability, s: Severity) -> Criticality {
    use Criticality::*;
    use Probability::*;
    use Severity::*;
    match (p, s) {
        (Frequent, Negligible) => Minor,
        (Frequent, Marginal) => High,
        (Frequent, Critical) => High,
        (Probable, Negligible) => Minor,
        (Probable, Marginal) => Major,
        (Probable, Critical) => High,
        (Remote, Negligible) => Insignificant,
        (Remote, Marginal) => Minor,
        (Remote, Critical) => Major,
        (Unlikely, Negligible) => Insignificant,
        (Unlikely, Marginal) => Insignificant,
        (Unlikely, Critical) => Minor,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmecaEntry {
    pub fault: FaultClass,
    pub probability: Probability,
    pub severity: Severity,
    pub criticality: Criticality,
}

impl FmecaEntry {
    pub fn new(fault: FaultClass, probability: Probability, severity: Severity) -> Self {
        FmecaEntry {
            fault,
            probability,
            severity,
            criticality: fmeca_criticality(probability, severity),
        }
    }
}

/// The assessment of the three fault classes.
pub fn fmeca_table() -> Vec<FmecaEntry> {
    vec![
        FmecaEntry::new(FaultClass::NodeHealth, Probability::Remote, Severity::Critical),
        FmecaEntry::new(FaultClass::DataHealth, Probability::Probable, Severity::Marginal),
        FmecaEntry::new(FaultClass::BehavioralSafety, Probability::Frequent, Severity::Critical),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assessed_cells() {
        let c: Vec<_> = fmeca_table().iter().map(|e| e.criticality).collect();
        assert_eq!(c, [Criticality::Major, Criticality::Major, Criticality::High]);
        assert_eq!(
            fmeca_criticality(Probability::Unlikely, Severity::Negligible),
            Criticality::Insignificant
        );
    }

    /// Moving to a more likely or more severe cell never lowers criticality.
    #[test]
    fn matrix_is_monotone() {
        for (i, p) in Probability::ALL.iter().enumerate() {
            for (j, s) in Severity::ALL.iter().enumerate() {
                let c = fmeca_criticality(*p, *s);
                if i > 0 {
                    assert!(fmeca_criticality(Probability::ALL[i - 1], *s) >= c);
                }
                if j > 0 {
                    assert!(fmeca_criticality(*p, Severity::ALL[j - 1]) <= c);
                }
            }
        }
    }
}
