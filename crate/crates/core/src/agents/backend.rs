// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::envelope::{parse_payload, AgentResponse, PromptEnvelope, Section, Shape};
use super::{AgentError, AgentRole};

/// Where envelopes go. Implementations return the raw response text; shape
/// parsing happens in [`Session`].
pub trait Backend {
    fn name(&self) -> &'static str;
    fn send(&mut self, env: &PromptEnvelope) -> Result<String, AgentError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub role: AgentRole,
    pub step_id: String,
    pub shape: Shape,
    pub response: String,
}

/// Every exchange of a run, in order. The run id is the directory the
/// transcript was loaded from; it is not stored in the file so that the
/// content-addressed run id does not depend on itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default, skip_serializing)]
    pub run_id: String,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Transcript, AgentError> {
        serde_json::from_str(text).map_err(|e| AgentError::Config(format!("transcript: {e}")))
    }
}

/// One rule of a scripted backend: the first rule whose role, step pattern
/// and optional context substring all match supplies the response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub role: Option<AgentRole>,
    pub step: String,
    #[serde(default)]
    pub contains: Option<String>,
    pub response: String,
}

/// Keyword rule for the root-cause classifier: all keywords present in the
/// rendered prompt selects `cause`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierRule {
    pub all: Vec<String>,
    pub cause: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub classifier: Vec<ClassifierRule>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Script, AgentError> {
        serde_json::from_str(text).map_err(|e| AgentError::Config(format!("script: {e}")))
    }
}

pub fn default_classifier() -> Vec<ClassifierRule> {
    vec![
        ClassifierRule {
            all: vec!["reset asserted in window: yes".into(), "disable clause: none".into()],
            cause: "over_specification".into(),
        },
        ClassifierRule {
            all: vec!["unconstrained input toggled: yes".into(), "assumptions: none".into()],
            cause: "missing_assumption".into(),
        },
    ]
}

/// Rule-driven backend for tests and offline runs. Roles whose answer can
/// be derived mechanically have built-in fallbacks after the script rules.
pub struct ScriptedBackend {
    rules: Vec<(Option<AgentRole>, glob::Pattern, Option<String>, String)>,
    classifier: Vec<ClassifierRule>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Result<ScriptedBackend, AgentError> {
        let mut rules = Vec::new();
        for r in script.rules {
            let pat = glob::Pattern::new(&r.step)
                .map_err(|e| AgentError::Config(format!("step pattern '{}': {e}", r.step)))?;
            rules.push((r.role, pat, r.contains, r.response));
        }
        let mut classifier = script.classifier;
        classifier.extend(default_classifier());
        Ok(ScriptedBackend { rules, classifier })
    }

    pub fn empty() -> ScriptedBackend {
        ScriptedBackend::new(Script::default()).expect("empty script is valid")
    }

    fn classify(&self, prompt: &str) -> String {
        for r in &self.classifier {
            if r.all.iter().all(|k| prompt.contains(k.as_str())) {
                return format!("{}: matched {}", r.cause, r.all.join(", "));
            }
        }
        "rtl_bug: no property-side rule matched".to_string()
    }

    fn fallback(&self, env: &PromptEnvelope) -> Option<String> {
        let req = env.section(Section::Requirement).unwrap_or("");
        Some(match env.role {
            AgentRole::SpecAnalyst if env.step_id.starts_with("ingest/") => {
                let lines: Vec<&str> = env
                    .section(Section::SpecFragment)
                    .unwrap_or("")
                    .lines()
                    .map(str::trim)
                    .filter(|l| l.starts_with("REQ:"))
                    .collect();
                if lines.is_empty() {
                    "none".to_string()
                } else {
                    lines.join("\n")
                }
            }
            AgentRole::SpecAnalyst => {
                format!("trigger: {req}\nresponse: {req}\ntiming: as stated\nexceptions: reset")
            }
            AgentRole::SvaLead => "assert the required response; cover the trigger".to_string(),
            AgentRole::SvaReviewer => "APPROVE".to_string(),
            AgentRole::SpecAssertionAnalyzer => self.classify(&env.render()),
            AgentRole::CovAnalyzer => "gap: no scripted verdict".to_string(),
            _ => return None,
        })
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn send(&mut self, env: &PromptEnvelope) -> Result<String, AgentError> {
        let rendered = env.render();
        for (role, pat, contains, response) in &self.rules {
            if role.is_some_and(|r| r != env.role) || !pat.matches(&env.step_id) {
                continue;
            }
            if contains.as_ref().is_some_and(|c| !rendered.contains(c.as_str())) {
                continue;
            }
            return Ok(response.clone());
        }
        self.fallback(env).ok_or_else(|| AgentError::NoRule {
            role: env.role,
            step_id: env.step_id.clone(),
        })
    }
}

/// Answers from a recorded transcript, keyed by envelope digest. Repeated
/// digests are answered in recording order.
pub struct ReplayBackend {
    by_digest: HashMap<String, VecDeque<String>>,
}

impl ReplayBackend {
    pub fn new(t: &Transcript) -> ReplayBackend {
        let mut by_digest: HashMap<String, VecDeque<String>> = HashMap::new();
        for e in &t.entries {
            by_digest.entry(e.digest.clone()).or_default().push_back(e.response.clone());
        }
        ReplayBackend { by_digest }
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn send(&mut self, env: &PromptEnvelope) -> Result<String, AgentError> {
        let digest = env.digest();
        self.by_digest
            .get_mut(&digest)
            .and_then(VecDeque::pop_front)
            .ok_or(AgentError::ReplayMiss { digest })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "LiveConfig::default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "LiveConfig::default_backoff")]
    pub backoff_ms: u64,
}

impl LiveConfig {
    fn default_timeout() -> u64 {
        120
    }

    fn default_backoff() -> u64 {
        500
    }
}

/// Chat-completion client. Request:
/// `{"model", "temperature", "messages": [{"role": "system", ...}, {"role": "user", ...}]}`;
/// the answer is read from `choices[0].message.content`.
pub struct LiveBackend {
    cfg: LiveConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

pub const LIVE_TRIES: u32 = 3;

impl LiveBackend {
    pub fn new(cfg: LiveConfig, api_key: Option<String>) -> LiveBackend {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
        LiveBackend { cfg, api_key, agent }
    }

    pub fn request_body(&self, env: &PromptEnvelope) -> serde_json::Value {
        let user = format!(
            "{}\nStep: {}\nAnswer shape: {}",
            env.render(),
            env.step_id,
            env.expected_shape.as_str()
        );
        json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": env.role.system_instructions()},
                {"role": "user", "content": user},
            ],
        })
    }

    fn once(&self, body: &serde_json::Value) -> Result<String, AgentError> {
        let mut req = self.agent.post(&self.cfg.endpoint).set("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let resp = req.send_json(body.clone()).map_err(|e| AgentError::Transport(e.to_string()))?;
        let v: serde_json::Value = resp.into_json().map_err(|e| AgentError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| AgentError::Transport("response has no choices[0].message.content".into()))
    }
}

impl Backend for LiveBackend {
    fn name(&self) -> &'static str {
        "live"
    }

    fn send(&mut self, env: &PromptEnvelope) -> Result<String, AgentError> {
        let body = self.request_body(env);
        let mut last = String::new();
        for i in 0..LIVE_TRIES {
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err(e) => last = e.to_string(),
            }
            if i + 1 < LIVE_TRIES {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << i));
            }
        }
        Err(AgentError::Transport(format!("{LIVE_TRIES} tries failed: {last}")))
    }
}

/// A backend plus the run's transcript, call counts and context budget.
/// Every response, accepted or not, is recorded so that replay sees the
/// same sequence.
pub struct Session {
    backend: Box<dyn Backend>,
    pub transcript: Transcript,
    pub budget: usize,
    calls: BTreeMap<AgentRole, usize>,
}

pub const DEFAULT_CONTEXT_BUDGET: usize = 16 * 1024;

impl Session {
    pub fn new(backend: Box<dyn Backend>) -> Session {
        Session {
            backend,
            transcript: Transcript::default(),
            budget: DEFAULT_CONTEXT_BUDGET,
            calls: BTreeMap::new(),
        }
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn calls(&self) -> usize {
        self.calls.values().sum()
    }

    pub fn calls_for(&self, role: AgentRole) -> usize {
        self.calls.get(&role).copied().unwrap_or(0)
    }

    /// One exchange. Shape failures come back as [`AgentError::Shape`].
    pub fn try_ask(&mut self, mut env: PromptEnvelope) -> Result<AgentResponse, AgentError> {
        env.fit(self.budget);
        let size = env.size();
        if size > self.budget {
            return Err(AgentError::Budget { size, budget: self.budget });
        }
        *self.calls.entry(env.role).or_default() += 1;
        let raw = self.backend.send(&env)?;
        self.transcript.entries.push(TranscriptEntry {
            digest: env.digest(),
            role: env.role,
            step_id: env.step_id.clone(),
            shape: env.expected_shape,
            response: raw.clone(),
        });
        let payload = parse_payload(env.expected_shape, &raw)?;
        Ok(AgentResponse {
            role: env.role,
            step_id: env.step_id,
            raw,
            payload,
        })
    }

    /// Ask, retrying once on any protocol failure.
    pub fn ask(&mut self, env: PromptEnvelope) -> Result<AgentResponse, AgentError> {
        match self.try_ask(env.clone()) {
            Ok(r) => Ok(r),
            Err(_) => self.try_ask(env.clone()).map_err(|e| AgentError::Protocol {
                role: env.role,
                step_id: env.step_id,
                source: Box::new(e),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Payload;

    fn review(step: &str) -> PromptEnvelope {
        PromptEnvelope::new(AgentRole::SvaReviewer, step, Shape::Verdict).with(Section::PriorCode, "P_1: ...")
    }

    #[test]
    fn approve_all_rule() {
        let script = Script::from_json(
            r#"{"rules":[{"role":"sva_reviewer","step":"*","response":"APPROVE"},
                         {"role":"sva_reviewer","step":"never","response":"REJECT"}]}"#,
        )
        .unwrap();
        let mut s = Session::new(Box::new(ScriptedBackend::new(script).unwrap()));
        for step in ["gen/REQ-001/review/1", "gen/REQ-002/review/3"] {
            let r = s.ask(review(step)).unwrap();
            assert!(matches!(r.payload, Payload::Verdict { approve: true, .. }));
        }
        assert_eq!(s.calls_for(AgentRole::SvaReviewer), 2);
    }

    #[test]
    fn replay_hit_and_miss() {
        let mut rec = Session::new(Box::new(ScriptedBackend::empty()));
        rec.ask(review("a")).unwrap();
        let mut rep = Session::new(Box::new(ReplayBackend::new(&rec.transcript)));
        let r = rep.ask(review("a")).unwrap();
        assert_eq!(r.raw, "APPROVE");
        assert_eq!(rep.transcript, rec.transcript);
        let miss = review("b");
        let digest = miss.digest();
        match rep.try_ask(miss) {
            Err(AgentError::ReplayMiss { digest: d }) => assert_eq!(d, digest),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_rule_is_protocol_error_after_retry() {
        let mut s = Session::new(Box::new(ScriptedBackend::empty()));
        let env = PromptEnvelope::new(AgentRole::SyntaxFixer, "syntax/P-1/1", Shape::CodePatch);
        assert!(matches!(s.ask(env), Err(AgentError::Protocol { .. })));
        assert_eq!(s.calls(), 2);
    }

    #[test]
    fn keyword_classifier() {
        let mut b = ScriptedBackend::empty();
        let env = PromptEnvelope::new(AgentRole::SpecAssertionAnalyzer, "cex/P-1/classify", Shape::Analysis)
            .with(Section::Diagnostics, "disable clause: none\nreset asserted in window: yes");
        assert!(b.send(&env).unwrap().starts_with("over_specification"));
        let env = env.with(Section::Diagnostics, "disable clause: present");
        assert!(b.send(&env).unwrap().starts_with("rtl_bug"));
    }

    #[test]
    fn live_request_shape() {
        let b = LiveBackend::new(
            LiveConfig {
                endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
                model: "m".into(),
                temperature: 0.0,
                timeout_secs: 1,
                backoff_ms: 1,
            },
            None,
        );
        let env = review("x");
        let body = b.request_body(&env);
        assert_eq!(body["messages"][0]["role"], "system");
        assert!(body["messages"][1]["content"].as_str().unwrap().contains("## prior_code"));
    }
}
