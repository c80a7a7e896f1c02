use serde::{Deserialize, Serialize};

/// Location and size of the largest violation of a checked inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Amount by which the inequality fails; negative values are margins.
    pub value: f64,
    pub t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub tolerance: f64,
    pub worst: Option<Witness>,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        CheckReport { name: name.into(), pass: true, tolerance, worst: None, samples: 0, note: None }
    }

    /// Records one sample whose inequality fails by `violation`.
    pub fn observe(&mut self, violation: f64, t: f64, s: f64) {
        self.samples += 1;
        let worse = match &self.worst {
            None => true,
            Some(w) => violation > w.value || violation.is_nan(),
        };
        if worse && !self.worst.is_some_and(|w| w.value.is_nan()) {
            self.worst = Some(Witness { value: violation, t, s });
        }
        self.pass = self.worst.is_some_and(|w| w.value <= self.tolerance);
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Marks the check failed when no sample was seen.
    pub fn require_samples(mut self) -> Self {
        if self.samples == 0 {
            self.pass = false;
            self.note.get_or_insert_with(|| "no samples in the check domain".into());
        }
        self
    }

    pub fn margin(&self) -> Option<f64> {
        self.worst.map(|w| w.value)
    }
}
