//! Raw idea to polished title through the rewriting prompt.

use std::io::{self, Write};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::machine::RawIdea;
use crate::prompt;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaRecord {
    pub title: String,
    pub raw: RawIdea,
    pub model_name: String,
    pub request_digest: String,
}

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model returned no usable title")]
    EmptyTitle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteFailure {
    pub index: usize,
    pub raw_text: String,
    pub reason: String,
}

pub fn build_rewrite_prompt(raw: &RawIdea) -> String {
    prompt::fill(prompt::REWRITE, &[("combination", &raw.text)])
}

const QUOTE_PAIRS: [(char, char); 5] = [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('`', '`')];

fn title_label() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^[*_]*title[*_]*\s*:[*_]*\s*").expect("valid regex"))
}

fn strip_wrappers(mut s: &str) -> &str {
    loop {
        let before = s;
        s = s.trim();
        s = s.trim_start_matches('#').trim_start();
        for marker in ["**", "__", "*", "_"] {
            if s.len() > 2 * marker.len() && s.starts_with(marker) && s.ends_with(marker) {
                s = &s[marker.len()..s.len() - marker.len()];
            }
        }
        if let Some(m) = title_label().find(s) {
            s = &s[m.end()..];
        }
        for (open, close) in QUOTE_PAIRS {
            if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
                s = &s[open.len_utf8()..s.len() - close.len_utf8()];
            }
        }
        if s == before {
            return s;
        }
    }
}

/// First nonempty line of a model answer with quotes, markdown emphasis,
/// heading marks and a leading `Title:` removed.
pub fn clean_title(response: &str) -> Option<String> {
    response
        .lines()
        .map(strip_wrappers)
        .find(|l| !l.is_empty())
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
}

pub fn rewrite(raw: &RawIdea, gateway: &Gateway) -> Result<IdeaRecord, RewriteError> {
    let request = gateway.request(build_rewrite_prompt(raw));
    let response = gateway.complete(&request)?;
    let title = clean_title(&response.text).ok_or(RewriteError::EmptyTitle)?;
    Ok(IdeaRecord { title, raw: raw.clone(), model_name: request.model_name, request_digest: response.key })
}

#[derive(Debug, Clone, Default)]
pub struct RewriteOutcome {
    pub records: Vec<IdeaRecord>,
    pub failures: Vec<RewriteFailure>,
}

/// Rewrite a batch through the gateway's concurrency bound. Records keep
/// input order; failed items are reported by index.
pub fn rewrite_batch(raws: &[RawIdea], gateway: &Gateway) -> RewriteOutcome {
    let requests: Vec<_> = raws.iter().map(|r| gateway.request(build_rewrite_prompt(r))).collect();
    let responses = gateway.complete_many(&requests);
    let mut outcome = RewriteOutcome::default();
    for (index, ((raw, request), response)) in raws.iter().zip(&requests).zip(responses).enumerate() {
        let result = response
            .map_err(RewriteError::from)
            .and_then(|r| clean_title(&r.text).map(|t| (t, r.key)).ok_or(RewriteError::EmptyTitle));
        match result {
            Ok((title, key)) => outcome.records.push(IdeaRecord {
                title,
                raw: raw.clone(),
                model_name: request.model_name.clone(),
                request_digest: key,
            }),
            Err(e) => {
                outcome.failures.push(RewriteFailure { index, raw_text: raw.text.clone(), reason: e.to_string() })
            }
        }
    }
    outcome
}

/// One title per line.
pub fn write_titles<W: Write>(records: &[IdeaRecord], mut out: W) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.title)?;
    }
    Ok(())
}
