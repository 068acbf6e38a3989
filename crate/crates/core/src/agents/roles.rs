// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AgentError;

/// The agents of the four pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    SvaLead,
    SpecAnalyst,
    SvaAuthor,
    SvaReviewer,
    SvaPatcher,
    CodeExtractor,
    SyntaxAnalyzer,
    SyntaxFixer,
    SyntaxValidator,
    VcdParser,
    SpecAssertionAnalyzer,
    RtlAnalyzer,
    CexFixer,
    CovLeadAgent,
    CovAnalyzer,
    CovProcessor,
    CovImprover,
}

impl AgentRole {
    pub const ALL: [AgentRole; 17] = [
        AgentRole::SvaLead,
        AgentRole::SpecAnalyst,
        AgentRole::SvaAuthor,
        AgentRole::SvaReviewer,
        AgentRole::SvaPatcher,
        AgentRole::CodeExtractor,
        AgentRole::SyntaxAnalyzer,
        AgentRole::SyntaxFixer,
        AgentRole::SyntaxValidator,
        AgentRole::VcdParser,
        AgentRole::SpecAssertionAnalyzer,
        AgentRole::RtlAnalyzer,
        AgentRole::CexFixer,
        AgentRole::CovLeadAgent,
        AgentRole::CovAnalyzer,
        AgentRole::CovProcessor,
        AgentRole::CovImprover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::SvaLead => "sva_lead",
            AgentRole::SpecAnalyst => "spec_analyst",
            AgentRole::SvaAuthor => "sva_author",
            AgentRole::SvaReviewer => "sva_reviewer",
            AgentRole::SvaPatcher => "sva_patcher",
            AgentRole::CodeExtractor => "code_extractor",
            AgentRole::SyntaxAnalyzer => "syntax_analyzer",
            AgentRole::SyntaxFixer => "syntax_fixer",
            AgentRole::SyntaxValidator => "syntax_validator",
            AgentRole::VcdParser => "vcd_parser",
            AgentRole::SpecAssertionAnalyzer => "spec_assertion_analyzer",
            AgentRole::RtlAnalyzer => "rtl_analyzer",
            AgentRole::CexFixer => "cex_fixer",
            AgentRole::CovLeadAgent => "cov_lead_agent",
            AgentRole::CovAnalyzer => "cov_analyzer",
            AgentRole::CovProcessor => "cov_processor",
            AgentRole::CovImprover => "cov_improver",
        }
    }

    /// Instructions sent as the system message to a live endpoint.
    pub fn system_instructions(self) -> &'static str {
        match self {
            AgentRole::SvaLead => {
                "You lead assertion generation. Read the requirement and its context and state a verification \
                 strategy in a few sentences: which behaviours need assertions, which need cover directives, \
                 and which input constraints are needed."
            }
            AgentRole::SpecAnalyst => {
                "Decompose the requirement into testable conditions. Answer with four labelled lines: \
                 trigger, response, timing, exceptions. When asked to extract requirements, answer with one \
                 line per requirement, each starting with 'REQ:'."
            }
            AgentRole::SvaAuthor => {
                "Write SystemVerilog assertions for the decomposed requirement. Answer with property \
                 statements only, one per line, in the form `LABEL: assert property (...);`, using signal \
                 names from the signal table."
            }
            AgentRole::SvaReviewer => {
                "Review the proposed properties against the requirement and the rulebook. Answer APPROVE or \
                 REJECT on the first line, then one reason per line."
            }
            AgentRole::SvaPatcher => {
                "Revise the rejected properties to address every reviewer reason. Answer with the complete \
                 revised property statements only."
            }
            AgentRole::CodeExtractor => "Extract the property statements from the text and assemble the assertion file.",
            AgentRole::SyntaxAnalyzer => "Attribute each compiler diagnostic to the property that caused it.",
            AgentRole::SyntaxFixer => {
                "Fix the compile error in the property. Answer with a unified diff against the property text \
                 shown under prior code; change nothing else."
            }
            AgentRole::SyntaxValidator => "Check the patched property in isolation before it is merged back.",
            AgentRole::VcdParser => "Summarise the waveform around the failure time for the signals of interest.",
            AgentRole::SpecAssertionAnalyzer => {
                "Classify the root cause of the counterexample. The first word of the answer must be one of \
                 rtl_bug, over_specification, missing_assumption, under_specification, followed by a short \
                 justification."
            }
            AgentRole::RtlAnalyzer => "Explain the RTL behaviour that produces the counterexample.",
            AgentRole::CexFixer => {
                "Repair the property so that it matches the specification: relax over-constrained timing, add a \
                 missing assumption as an extra `assume property` statement, or strengthen an under-specified \
                 assertion. Answer with a unified diff against the property text."
            }
            AgentRole::CovLeadAgent => "Order coverage gaps so that functional paths come before fallback arms.",
            AgentRole::CovAnalyzer => {
                "Decide whether the unreachable statement is intentionally defensive code or a verification \
                 gap. The first word of the answer must be 'defensive' or 'gap', followed by the enabling \
                 condition of the statement."
            }
            AgentRole::CovProcessor => "Link each coverage gap to the requirements it serves.",
            AgentRole::CovImprover => {
                "Write property statements that target the gap: cover directives for reachability and \
                 assertions for correctness. Answer with property statements only."
            }
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, AgentError> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| AgentError::Config(format!("unknown agent role '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_distinct_names() {
        let names: std::collections::BTreeSet<_> = AgentRole::ALL.iter().map(|r| r.as_str()).collect();
        assert_eq!(names.len(), 17);
        for r in AgentRole::ALL {
            assert_eq!(r.as_str().parse::<AgentRole>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.as_str()));
            assert!(!r.system_instructions().is_empty());
        }
    }
}
