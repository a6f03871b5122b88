//! Running programs against test suites, and the program-level metrics.

mod runner;

use serde::{Deserialize, Serialize};

pub use runner::{
    normalize_output, outputs_match, Limits, Outcome, PreparedProgram, RunnerSpec, RunnerTable, TestVerdict,
};

use crate::corpus::{Problem, TestCase};
use crate::error::JudgeError;
use crate::sync::Semaphore;

/// Per-case pass flags, in test-case order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PassVector(pub Vec<bool>);

impl PassVector {
    pub fn all_pass(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|p| *p)
    }

    pub fn passed(&self) -> usize {
        self.0.iter().filter(|p| **p).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<bool>> for PassVector {
    fn from(v: Vec<bool>) -> Self {
        PassVector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeEvaluation {
    pub pass_vector: PassVector,
    pub verdicts: Vec<TestVerdict>,
    pub compile_error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSettings {
    pub limits: Limits,
    /// Exact byte comparison instead of trailing-whitespace-insensitive.
    pub strict_output: bool,
    /// Maximum concurrently running programs.
    pub workers: usize,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        JudgeSettings {
            limits: Limits::default(),
            strict_output: false,
            workers: 4,
        }
    }
}

/// Sandboxed evaluator shared by all samples of a run.
pub struct Judge {
    runners: RunnerTable,
    settings: JudgeSettings,
    slots: Semaphore,
}

impl Judge {
    pub fn new(runners: RunnerTable, settings: JudgeSettings) -> Self {
        let slots = Semaphore::new(settings.workers);
        Judge {
            runners,
            settings,
            slots,
        }
    }

    pub fn settings(&self) -> &JudgeSettings {
        &self.settings
    }

    /// One program on one test case.
    pub fn run_program(&self, code: &str, language_tag: &str, case: &TestCase) -> Result<TestVerdict, JudgeError> {
        let spec = self.runners.lookup(language_tag)?;
        let _slot = self.slots.acquire();
        let program = PreparedProgram::prepare(code, spec)?;
        program.run_case(0, &case.input, &case.expected_output, &self.settings.limits, self.settings.strict_output)
    }

    /// Runs every test case (no short-circuit). A compile error fails all
    /// cases.
    pub fn evaluate_code(&self, code: &str, language_tag: &str, problem: &Problem) -> Result<CodeEvaluation, JudgeError> {
        if problem.test_cases.is_empty() {
            return Err(JudgeError::NoTestCases(problem.id.clone()));
        }
        let spec = self.runners.lookup(language_tag)?;
        let _slot = self.slots.acquire();
        let program = PreparedProgram::prepare(code, spec)?;
        let mut verdicts = Vec::with_capacity(problem.test_cases.len());
        for (i, case) in problem.test_cases.iter().enumerate() {
            verdicts.push(program.run_case(
                i,
                &case.input,
                &case.expected_output,
                &self.settings.limits,
                self.settings.strict_output,
            )?);
        }
        Ok(CodeEvaluation {
            pass_vector: PassVector(verdicts.iter().map(|v| v.outcome == Outcome::Pass).collect()),
            compile_error: program.compile_error().is_some(),
            verdicts,
        })
    }
}

/// Fraction of samples whose final pass vector is all-true.
pub fn accuracy(final_vectors: &[PassVector]) -> Result<f64, JudgeError> {
    if final_vectors.is_empty() {
        return Err(JudgeError::NoSamples);
    }
    let solved = final_vectors.iter().filter(|v| v.all_pass()).count();
    Ok(solved as f64 / final_vectors.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub value: f64,
    /// The buggy program already passed every case (m = 0).
    pub degenerate: bool,
}

/// Share of previously failing cases that now pass, or 0 if any previously
/// passing case regressed. With no failing cases to begin with the value is
/// 1 (or 0 on regression) and the sample is flagged degenerate.
pub fn improvement(buggy: &PassVector, fixed: &PassVector) -> Result<Improvement, JudgeError> {
    if buggy.len() != fixed.len() {
        return Err(JudgeError::LengthMismatch(buggy.len(), fixed.len()));
    }
    let preserved = buggy.0.iter().zip(&fixed.0).all(|(b, f)| !*b || *f);
    let failing = buggy.0.iter().filter(|b| !**b).count();
    let newly = buggy.0.iter().zip(&fixed.0).filter(|(b, f)| !**b && **f).count();
    let indicator = if preserved { 1.0 } else { 0.0 };
    if failing == 0 {
        return Ok(Improvement {
            value: indicator,
            degenerate: true,
        });
    }
    Ok(Improvement {
        value: indicator * newly as f64 / failing as f64,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(bits: &str) -> PassVector {
        PassVector(bits.chars().map(|c| c == '1').collect())
    }

    #[test]
    fn improvement_canonical_cases() {
        let buggy = pv("1111110000");
        assert_eq!(improvement(&buggy, &pv("1111111111")).unwrap().value, 1.0);
        assert_eq!(improvement(&buggy, &pv("1111111100")).unwrap().value, 0.5);
        assert_eq!(improvement(&buggy, &pv("0111111111")).unwrap().value, 0.0);
        assert_eq!(improvement(&buggy, &buggy).unwrap().value, 0.0);
    }

    #[test]
    fn improvement_degenerate_and_errors() {
        let all = pv("111");
        assert_eq!(improvement(&all, &all).unwrap(), Improvement { value: 1.0, degenerate: true });
        assert_eq!(improvement(&all, &pv("110")).unwrap(), Improvement { value: 0.0, degenerate: true });
        assert!(matches!(improvement(&all, &pv("11")), Err(JudgeError::LengthMismatch(3, 2))));
    }

    #[test]
    fn accuracy_counts_all_pass() {
        let v = [pv("11"), pv("10"), pv("11"), pv("00")];
        assert_eq!(accuracy(&v).unwrap(), 0.5);
        assert_eq!(accuracy(&[pv("1"), pv("111")]).unwrap(), 1.0);
        assert!(matches!(accuracy(&[]), Err(JudgeError::NoSamples)));
    }
}
