use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::data::{AgeGroup, ImpactVector, MixComposition};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceQuery {
    pub age_group: AgeGroup,
    /// MPa.
    pub strength_center: f64,
    /// MPa; the band is the closed interval `center ± tolerance`.
    pub strength_tolerance: f64,
}

impl DominanceQuery {
    pub fn new(age_group: AgeGroup, strength_center: f64) -> Self {
        Self { age_group, strength_center, strength_tolerance: 1.0 }
    }

    pub fn validate(&self) -> Result<(), AnalyzeError> {
        if !(self.strength_tolerance > 0.0) || !self.strength_center.is_finite() {
            return Err(AnalyzeError::InvalidQuery("strength tolerance must be > 0".into()));
        }
        Ok(())
    }

    pub fn band(&self) -> (f64, f64) {
        (self.strength_center - self.strength_tolerance, self.strength_center + self.strength_tolerance)
    }

    pub fn contains(&self, strength: f64) -> bool {
        let (lo, hi) = self.band();
        (lo..=hi).contains(&strength)
    }
}

/// A mix with strength and impacts from whichever scorer the caller uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredMix {
    pub mix: MixComposition,
    pub age_group: AgeGroup,
    pub strength: f64,
    pub impacts: ImpactVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub age_group: AgeGroup,
    pub strength_center: f64,
    pub strength_tolerance: f64,
    pub reference_count: usize,
    pub best_reference: ImpactVector,
    pub generated_in_band: usize,
    pub count: usize,
    /// Mean percentage reduction vs. the reference bests, per impact; zero when `count == 0`.
    pub reduction_pct: ImpactVector,
}

/// Generated samples in the query's age group and strength band whose three
/// impacts are all strictly below the best training values in the same band.
/// Returns indices into `generated` and the summary row.
pub fn filter_dominating(
    generated: &[ScoredMix],
    training: &[ScoredMix],
    q: &DominanceQuery,
) -> Result<(Vec<usize>, ReductionReport), AnalyzeError> {
    q.validate()?;
    let in_band = |s: &&ScoredMix| s.age_group == q.age_group && q.contains(s.strength);
    let mut best = [f64::INFINITY; 3];
    let mut reference_count = 0;
    for t in training.iter().filter(in_band) {
        reference_count += 1;
        for (b, v) in best.iter_mut().zip(t.impacts.to_array()) {
            *b = b.min(v);
        }
    }
    if reference_count == 0 {
        let (lo, hi) = q.band();
        return Err(AnalyzeError::NoReferenceBand { group: q.age_group.label().into(), lo, hi });
    }

    let mut passing = Vec::new();
    let mut generated_in_band = 0;
    let mut sums = [0.0; 3];
    for (i, g) in generated.iter().enumerate() {
        if !in_band(&g) {
            continue;
        }
        generated_in_band += 1;
        let v = g.impacts.to_array();
        if v.iter().zip(&best).all(|(x, b)| x < b) {
            passing.push(i);
            for d in 0..3 {
                sums[d] += (best[d] - v[d]) / best[d] * 100.0;
            }
        }
    }
    let n = passing.len().max(1) as f64;
    let report = ReductionReport {
        age_group: q.age_group,
        strength_center: q.strength_center,
        strength_tolerance: q.strength_tolerance,
        reference_count,
        best_reference: ImpactVector::from_array(best),
        generated_in_band,
        count: passing.len(),
        reduction_pct: ImpactVector::from_array(sums.map(|s| s / n)),
    };
    Ok((passing, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scored(strength: f64, impacts: [f64; 3]) -> ScoredMix {
        ScoredMix {
            mix: MixComposition::from_array([300.0, 0.0, 0.0, 180.0, 0.0, 1000.0, 800.0]),
            age_group: AgeGroup::D14,
            strength,
            impacts: ImpactVector::from_array(impacts),
        }
    }

    fn q() -> DominanceQuery {
        DominanceQuery::new(AgeGroup::D14, 60.0)
    }

    #[test]
    fn arithmetic_example() {
        let training = [scored(60.0, [100.0, 1.0, 0.2]), scored(59.5, [120.0, 2.0, 0.3])];
        let (idx, r) = filter_dominating(&[scored(60.5, [50.0, 0.5, 0.1])], &training, &q()).unwrap();
        assert_eq!(idx, vec![0]);
        assert_eq!(r.best_reference, ImpactVector::new(100.0, 1.0, 0.2));
        assert_eq!(r.reduction_pct, ImpactVector::new(50.0, 50.0, 50.0));
        assert_eq!((r.count, r.reference_count, r.generated_in_band), (1, 2, 1));
    }

    #[test]
    fn ties_are_excluded() {
        let training = [scored(60.0, [100.0, 1.0, 0.2])];
        let (idx, r) = filter_dominating(&[scored(60.0, [100.0, 0.5, 0.1])], &training, &q()).unwrap();
        assert!(idx.is_empty());
        assert_eq!(r.reduction_pct, ImpactVector::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn band_is_closed_and_group_restricted() {
        let training = [scored(59.0, [100.0, 1.0, 0.2]), scored(58.99, [1.0, 0.01, 0.01])];
        let mut other_group = scored(60.0, [1.0, 0.1, 0.01]);
        other_group.age_group = AgeGroup::D28;
        let generated = [scored(61.0, [1.0, 0.1, 0.01]), scored(61.01, [1.0, 0.1, 0.01]), other_group];
        let (idx, r) = filter_dominating(&generated, &training, &q()).unwrap();
        assert_eq!(idx, vec![0]);
        assert_eq!(r.reference_count, 1);
    }

    #[test]
    fn empty_band_and_bad_tolerance_error() {
        assert!(matches!(filter_dominating(&[], &[scored(30.0, [1.0; 3])], &q()), Err(AnalyzeError::NoReferenceBand { .. })));
        let bad = DominanceQuery { strength_tolerance: 0.0, ..q() };
        assert!(filter_dominating(&[], &[scored(60.0, [1.0; 3])], &bad).is_err());
    }

    fn impacts() -> impl Strategy<Value = [f64; 3]> {
        [1.0f64..500.0, 0.01f64..3.0, 0.01f64..0.5]
    }

    proptest! {
        #[test]
        fn adding_a_dominated_sample_keeps_the_pass_set(
            train in prop::collection::vec(impacts(), 1..6),
            gen in prop::collection::vec(impacts(), 0..30),
        ) {
            let training: Vec<_> = train.iter().map(|v| scored(60.0, *v)).collect();
            let generated: Vec<_> = gen.iter().map(|v| scored(60.0, *v)).collect();
            let (base, _) = filter_dominating(&generated, &training, &q()).unwrap();
            let worst = [1e6, 1e6, 1e6];
            let mut more = generated.clone();
            more.push(scored(60.0, worst));
            let (after, _) = filter_dominating(&more, &training, &q()).unwrap();
            prop_assert_eq!(base, after);
        }

        #[test]
        fn reductions_are_scale_covariant_and_bounded(
            train in prop::collection::vec(impacts(), 1..6),
            gen in prop::collection::vec(impacts(), 1..30),
            c in 0.001f64..1000.0,
        ) {
            let training: Vec<_> = train.iter().map(|v| scored(60.0, *v)).collect();
            let generated: Vec<_> = gen.iter().map(|v| scored(60.0, *v)).collect();
            let (idx, r) = filter_dominating(&generated, &training, &q()).unwrap();
            for p in r.reduction_pct.to_array() {
                prop_assert!((0.0..=100.0).contains(&p));
            }
            let scale = |s: &ScoredMix| { let mut s = *s; s.impacts.ap *= c; s };
            let (idx2, r2) = filter_dominating(
                &generated.iter().map(scale).collect::<Vec<_>>(),
                &training.iter().map(scale).collect::<Vec<_>>(),
                &q(),
            ).unwrap();
            prop_assert_eq!(idx, idx2);
            prop_assert!((r.reduction_pct.ap - r2.reduction_pct.ap).abs() < 1e-9);
        }
    }
}
