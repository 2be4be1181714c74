use serde::{Deserialize, Serialize};

use crate::dataflow::TestCase;

pub const SUITE_SCHEMA: &str = "pbmt.suite/v1";

/// Where a test came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    pub seed: u64,
    /// Mutant the test was generated for, if the strategy targets mutants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteTest {
    pub id: String,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub test: TestCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub schema: String,
    pub strategy: String,
    pub tests: Vec<SuiteTest>,
}

impl TestSuite {
    pub fn new(strategy: impl Into<String>, tests: Vec<SuiteTest>) -> Self {
        Self { schema: SUITE_SCHEMA.into(), strategy: strategy.into(), tests }
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }
}
