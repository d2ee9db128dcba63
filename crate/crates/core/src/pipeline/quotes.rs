//! Correction loop 1: every model-proposed quote must occur in the chapter.
//!
//! Matching tolerates whitespace differences (line wrapping) and curly vs.
//! straight quote marks. The stored quote is always the span copied from
//! the chapter, so it is an exact substring of the source text. Candidates
//! that do not match are replaced by a short model explanation of the
//! entity's emotions.

use crate::llm::schema::ExplanationReply;
use crate::llm::{Gateway, LlmRequest, ModelRole, SchemaTag};
use crate::model::{Evidence, ProvenanceLog};

use super::prompts;
use super::segment::SceneDraft;

fn unify(ch: char) -> char {
    match ch {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' => '"',
        c => c,
    }
}

/// Text with whitespace runs collapsed and quote marks unified, plus the
/// original byte span behind every normalized byte.
struct Normalized {
    text: String,
    spans: Vec<(usize, usize)>,
}

fn normalize(s: &str) -> Normalized {
    let mut text = String::with_capacity(s.len());
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(s.len());
    let mut in_space = false;
    for (i, ch) in s.char_indices() {
        let end = i + ch.len_utf8();
        if ch.is_whitespace() {
            if in_space {
                if let Some(last) = spans.last_mut() {
                    last.1 = end;
                }
                continue;
            }
            in_space = true;
            text.push(' ');
            spans.push((i, end));
        } else {
            in_space = false;
            let u = unify(ch);
            text.push(u);
            for _ in 0..u.len_utf8() {
                spans.push((i, end));
            }
        }
    }
    Normalized { text, spans }
}

/// Normalized form used for comparison (exposed for tests and the guide).
pub fn normalize_for_match(s: &str) -> String {
    normalize(s).text.trim().to_string()
}

/// Finds `candidate` in `chapter` up to whitespace and quote-mark
/// differences and returns the matching span in its original spelling.
///
/// ```
/// use ribbons_core::pipeline::quotes::find_quote;
/// let chapter = "He said, \u{201C}I can\u{2019}t\ngo.\u{201D}\n";
/// assert_eq!(find_quote(chapter, "I can't go."), Some("I can\u{2019}t\ngo."));
/// assert_eq!(find_quote(chapter, "I cannot go."), None);
/// ```
pub fn find_quote<'a>(chapter: &'a str, candidate: &str) -> Option<&'a str> {
    let needle = normalize_for_match(candidate);
    if needle.is_empty() {
        return None;
    }
    let hay = normalize(chapter);
    let pos = hay.text.find(&needle)?;
    let start = hay.spans[pos].0;
    let end = hay.spans[pos + needle.len() - 1].1;
    Some(&chapter[start..end])
}

/// Outcome of checking one candidate, before any fallback call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuoteCheck {
    Verified(String),
    /// Candidate given but not found in the chapter.
    Fabricated,
    /// No candidate given.
    Missing,
}

pub fn check_candidate(chapter: &str, candidate: Option<&str>) -> QuoteCheck {
    match candidate.map(str::trim).filter(|c| !c.is_empty()) {
        None => QuoteCheck::Missing,
        Some(c) => match find_quote(chapter, c) {
            Some(original) => QuoteCheck::Verified(original.to_string()),
            None => QuoteCheck::Fabricated,
        },
    }
}

/// Chapter drafts as seen by the quote loop.
pub struct ChapterDrafts<'a> {
    pub chapter_index: usize,
    pub text: &'a str,
    pub drafts: &'a mut [SceneDraft],
}

/// Runs the quote check over every appearance of every scene and fills in
/// `evidence`. Fallback explanations are requested concurrently.
pub async fn verify_quotes(
    gateway: &Gateway,
    chapters: &mut [ChapterDrafts<'_>],
    limit: usize,
) -> ProvenanceLog {
    let mut log = ProvenanceLog::default();
    log.loop_runs.quote_check = 1;
    let mut pending = Vec::new();
    let mut requests = Vec::new();
    for ch in chapters.iter_mut() {
        for (si, draft) in ch.drafts.iter_mut().enumerate() {
            let mut used_tags = std::collections::BTreeSet::new();
            for (ai, app) in draft.raw_appearances.iter_mut().enumerate() {
                match check_candidate(ch.text, app.quote_candidate.as_deref()) {
                    QuoteCheck::Verified(q) => {
                        log.quotes_checked += 1;
                        app.evidence = Some(Evidence::verified_quote(q));
                        continue;
                    }
                    QuoteCheck::Fabricated => {
                        log.quotes_checked += 1;
                        log.quotes_replaced += 1;
                    }
                    QuoteCheck::Missing => log.quotes_missing += 1,
                }
                let slug = crate::text::unique_slug(
                    &format!("{}-{}", app.kind.as_str(), app.raw_name),
                    "entity",
                    &mut used_tags,
                );
                let tag = format!("quote_explain/ch{}/s{si}/{slug}", ch.chapter_index);
                let scene_text = super::scene_lines(ch.text, draft.line_start, draft.line_end);
                requests.push(
                    LlmRequest::new(tag, SchemaTag::Explanation, ModelRole::Extraction)
                        .system(prompts::quote_explanation_system())
                        .user(prompts::quote_explanation_user(
                            &app.raw_name,
                            app.kind,
                            &app.emotion,
                            &scene_text,
                        )),
                );
                pending.push((ch.chapter_index, si, ai));
            }
        }
    }

    let results = gateway.map_concurrent(requests, limit).await;
    for ((ci, si, ai), result) in pending.into_iter().zip(results) {
        let ch = chapters
            .iter_mut()
            .find(|c| c.chapter_index == ci)
            .expect("pending entry refers to a known chapter");
        let app = &mut ch.drafts[si].raw_appearances[ai];
        let text = match result.and_then(|r| r.parse_as::<ExplanationReply>()) {
            Ok(reply) => reply.explanation.trim().to_string(),
            Err(e) => {
                log.flag(
                    "quote_check",
                    format!("explanation for {} in {ci}.{si} failed ({e}); using emotion phrase", app.raw_name),
                );
                app.emotion.clone()
            }
        };
        app.evidence = Some(Evidence::explanation(text));
    }
    log
}

/// Quote check for a single entity-level quote with its own fallback call.
/// Returns the evidence and updates the counters in `log`.
pub async fn verify_single(
    gateway: &Gateway,
    texts: &[&str],
    candidate: Option<&str>,
    fallback: LlmRequest,
    fallback_text: &str,
    log: &mut ProvenanceLog,
) -> Evidence {
    let mut fabricated = false;
    if let Some(c) = candidate.map(str::trim).filter(|c| !c.is_empty()) {
        log.quotes_checked += 1;
        for text in texts {
            if let Some(q) = find_quote(text, c) {
                return Evidence::verified_quote(q);
            }
        }
        fabricated = true;
        log.quotes_replaced += 1;
    } else {
        log.quotes_missing += 1;
    }
    let tag = fallback.tag.clone();
    match gateway.complete_as::<ExplanationReply>(fallback).await {
        Ok((reply, _)) => Evidence::explanation(reply.explanation.trim()),
        Err(e) => {
            log.flag(
                "quote_check",
                format!("{tag} failed ({e}); fabricated={fabricated}; using fallback text"),
            );
            Evidence::explanation(fallback_text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_candidate_verifies() {
        let ch = "The lamp burned low.\nShe waited.\n";
        assert_eq!(
            check_candidate(ch, Some("The lamp burned low.")),
            QuoteCheck::Verified("The lamp burned low.".into())
        );
    }

    #[test]
    fn pov_rewrite_is_rejected() {
        let ch = "He felt he could not bear it.\n";
        assert_eq!(check_candidate(ch, Some("I felt I could not bear it.")), QuoteCheck::Fabricated);
    }

    #[test]
    fn curly_apostrophe_variant_keeps_original_spelling() {
        let ch = "\u{201C}Don\u{2019}t touch the lamp,\u{201D} she said.\n";
        match check_candidate(ch, Some("\"Don't touch the lamp,\" she said.")) {
            QuoteCheck::Verified(q) => {
                assert_eq!(q, "\u{201C}Don\u{2019}t touch the lamp,\u{201D} she said.");
                assert!(ch.contains(&q));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrapped_line_matches_single_space() {
        let ch = "It was the\n   longest night  of the year.";
        assert_eq!(
            find_quote(ch, "the longest night of the year."),
            Some("the\n   longest night  of the year.")
        );
    }

    #[test]
    fn blank_candidates_are_missing() {
        assert_eq!(check_candidate("abc", None), QuoteCheck::Missing);
        assert_eq!(check_candidate("abc", Some("   ")), QuoteCheck::Missing);
    }

    #[test]
    fn multibyte_text_maps_back() {
        let ch = "Café \u{2014} naïve “quote” here";
        assert_eq!(find_quote(ch, "naïve \"quote\""), Some("naïve “quote”"));
    }
}
