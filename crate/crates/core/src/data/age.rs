use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DataError, LabeledMix};

/// Curing-age strata used for strength prediction.
///
/// Buckets are half-open on the upper bound: ≤3, 4–7, 8–14, 15–28, 29–56, ≥57 days.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AgeGroup {
    Le3,
    D7,
    D14,
    D28,
    D56,
    Ge90,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 6] = [
        AgeGroup::Le3,
        AgeGroup::D7,
        AgeGroup::D14,
        AgeGroup::D28,
        AgeGroup::D56,
        AgeGroup::Ge90,
    ];

    pub fn from_days(days: u32) -> Self {
        match days {
            0..=3 => AgeGroup::Le3,
            4..=7 => AgeGroup::D7,
            8..=14 => AgeGroup::D14,
            15..=28 => AgeGroup::D28,
            29..=56 => AgeGroup::D56,
            _ => AgeGroup::Ge90,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::Le3 => "LE3",
            AgeGroup::D7 => "D7",
            AgeGroup::D14 => "D14",
            AgeGroup::D28 => "D28",
            AgeGroup::D56 => "D56",
            AgeGroup::Ge90 => "GE90",
        }
    }

    /// Six-slot one-hot encoding.
    pub fn one_hot(self) -> [f64; 6] {
        let mut v = [0.0; 6];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AgeGroup {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        AgeGroup::ALL
            .into_iter()
            .find(|g| g.label() == upper)
            .ok_or_else(|| DataError::UnknownAgeGroup(s.to_string()))
    }
}

impl From<AgeGroup> for String {
    fn from(g: AgeGroup) -> Self {
        g.label().to_string()
    }
}

impl TryFrom<String> for AgeGroup {
    type Error = DataError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Partitions rows by curing-age group. All six groups are present in the
/// result, possibly empty.
pub fn group_by_age(rows: &[LabeledMix]) -> BTreeMap<AgeGroup, Vec<LabeledMix>> {
    let mut groups: BTreeMap<AgeGroup, Vec<LabeledMix>> =
        AgeGroup::ALL.into_iter().map(|g| (g, Vec::new())).collect();
    for row in rows {
        groups.entry(row.age_group()).or_default().push(*row);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ImpactVector, MixComposition};
    use proptest::prelude::*;

    #[test]
    fn bucket_boundaries() {
        assert_eq!(AgeGroup::from_days(1), AgeGroup::Le3);
        assert_eq!(AgeGroup::from_days(3), AgeGroup::Le3);
        assert_eq!(AgeGroup::from_days(4), AgeGroup::D7);
        assert_eq!(AgeGroup::from_days(7), AgeGroup::D7);
        assert_eq!(AgeGroup::from_days(14), AgeGroup::D14);
        assert_eq!(AgeGroup::from_days(28), AgeGroup::D28);
        assert_eq!(AgeGroup::from_days(29), AgeGroup::D56);
        assert_eq!(AgeGroup::from_days(56), AgeGroup::D56);
        assert_eq!(AgeGroup::from_days(57), AgeGroup::Ge90);
        assert_eq!(AgeGroup::from_days(365), AgeGroup::Ge90);
    }

    #[test]
    fn labels_parse_case_insensitively() {
        assert_eq!("d14".parse::<AgeGroup>().unwrap(), AgeGroup::D14);
        assert_eq!("ge90".parse::<AgeGroup>().unwrap(), AgeGroup::Ge90);
        assert!("D21".parse::<AgeGroup>().is_err());
        let json = serde_json::to_string(&AgeGroup::Le3).unwrap();
        assert_eq!(json, "\"LE3\"");
    }

    fn row(age_days: u32) -> LabeledMix {
        LabeledMix {
            mix: MixComposition::default(),
            age_days,
            strength: 10.0,
            impacts: ImpactVector::default(),
        }
    }

    #[test]
    fn grouping_examples() {
        let groups = group_by_age(&[row(3), row(28), row(365)]);
        assert_eq!(groups.len(), 6);
        assert_eq!(groups[&AgeGroup::Le3].len(), 1);
        assert_eq!(groups[&AgeGroup::D28].len(), 1);
        assert_eq!(groups[&AgeGroup::Ge90].len(), 1);
        assert!(groups[&AgeGroup::D7].is_empty());
    }

    proptest! {
        #[test]
        fn grouping_is_a_partition(ages in proptest::collection::vec(1u32..400, 1..200)) {
            let rows: Vec<_> = ages.iter().map(|&a| row(a)).collect();
            let groups = group_by_age(&rows);
            let total: usize = groups.values().map(Vec::len).sum();
            prop_assert_eq!(total, rows.len());
            for (g, members) in &groups {
                for m in members {
                    prop_assert_eq!(m.age_group(), *g);
                }
            }
        }
    }
}
