use serde::{Deserialize, Serialize};

use super::Dataset;

/// Row counts violating the structural rules of the logging process.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Rows with `treatment = 0` and `exposure = 1`.
    pub control_exposed: usize,
    /// Rows with `visit = 0` and `conversion = 1`.
    pub conversion_without_visit: usize,
}

impl ConstraintReport {
    pub fn is_clean(&self) -> bool {
        self.control_exposed == 0 && self.conversion_without_visit == 0
    }
}

pub fn validate_constraints(d: &Dataset) -> ConstraintReport {
    d.samples()
        .iter()
        .fold(ConstraintReport::default(), |mut r, s| {
            r.control_exposed += usize::from(!s.treatment && s.exposure);
            r.conversion_without_visit += usize::from(!s.visit && s.conversion);
            r
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;

    fn row(t: bool, e: bool, v: bool, c: bool) -> Sample {
        Sample {
            treatment: t,
            exposure: e,
            visit: v,
            conversion: c,
            ..Sample::features([0.0; 4], [0; 8])
        }
    }

    #[test]
    fn control_exposure_counted() {
        let r = validate_constraints(&Dataset::new(vec![row(false, true, false, false)]));
        assert_eq!(r.control_exposed, 1);
        assert_eq!(r.conversion_without_visit, 0);
    }

    #[test]
    fn conversion_without_visit_counted() {
        let r = validate_constraints(&Dataset::new(vec![row(true, true, false, true)]));
        assert_eq!(r.control_exposed, 0);
        assert_eq!(r.conversion_without_visit, 1);
    }

    #[test]
    fn clean_rows() {
        let d = Dataset::new(vec![row(true, true, true, true), row(false, false, true, false)]);
        assert!(validate_constraints(&d).is_clean());
    }
}
