//! Small string helpers shared across modules.

/// Lowercase ASCII slug: alphanumerics kept, everything else collapsed into
/// single `-`, no leading or trailing dash. Non-ASCII letters are dropped.
///
/// ```
/// use ribbons_core::text::slugify;
/// assert_eq!(slugify("Mr. Bennet's  Study"), "mr-bennet-s-study");
/// assert_eq!(slugify("¿?"), "");
/// ```
pub fn slugify(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_dash = false;
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_dash = true;
        }
    }
    out
}

/// Slug truncated to at most `max` bytes, never ending in a dash.
pub fn short_slug(s: &str, max: usize) -> String {
    let mut slug = slugify(s);
    if slug.len() > max {
        slug.truncate(max);
        while slug.ends_with('-') {
            slug.pop();
        }
    }
    slug
}

/// Collapses whitespace runs to single spaces and trims; lowercases.
/// Used to key caches and match model-reported names.
pub fn normalize_key(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Returns a slug that is not yet in `taken`, appending `-2`, `-3`, ... if needed,
/// and records it. Empty slugs become `fallback`.
pub fn unique_slug(
    name: &str,
    fallback: &str,
    taken: &mut std::collections::BTreeSet<String>,
) -> String {
    let mut base = slugify(name);
    if base.is_empty() {
        base = fallback.to_string();
    }
    let mut candidate = base.clone();
    let mut n = 2;
    while taken.contains(&candidate) {
        candidate = format!("{base}-{n}");
        n += 1;
    }
    taken.insert(candidate.clone());
    candidate
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn unique_slugs_get_suffixes() {
        let mut taken = BTreeSet::new();
        assert_eq!(unique_slug("Mr. Samsa", "x", &mut taken), "mr-samsa");
        assert_eq!(unique_slug("Mr Samsa", "x", &mut taken), "mr-samsa-2");
        assert_eq!(unique_slug("...", "entity", &mut taken), "entity");
    }

    #[test]
    fn short_slug_trims_trailing_dash() {
        assert_eq!(short_slug("when does it end", 5), "when");
    }

    #[test]
    fn normalize_key_collapses() {
        assert_eq!(normalize_key("  Inner   Conflict "), "inner conflict");
    }
}
