/// Splits text into matcher tokens.
///
/// ASCII letters are lowercased and ASCII punctuation is deleted (so
/// `"sun-gear"` becomes `"sungear"`). Everything outside ASCII is left as is.
pub fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

const ARTICLES: [&str; 5] = ["the", "a", "an", "some", "my"];

/// Drops leading articles from a slot span: `[the, sun, gear]` -> `[sun, gear]`.
pub(crate) fn strip_articles(tokens: &[String]) -> &[String] {
    let skip = tokens
        .iter()
        .take_while(|t| ARTICLES.contains(&t.as_str()))
        .count();
    &tokens[skip..]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lowercases_and_strips_punctuation() {
        assert_eq!(normalize("Give me the Screwdriver!"), toks(&["give", "me", "the", "screwdriver"]));
    }

    #[test]
    fn empty_input() {
        assert!(normalize("").is_empty());
        assert!(normalize("  ?! ").is_empty());
    }

    #[test]
    fn collapses_whitespace() {
        assert_eq!(normalize("  sun   gear "), toks(&["sun", "gear"]));
        assert_eq!(normalize("sun\tgear\n"), toks(&["sun", "gear"]));
    }

    #[test]
    fn non_ascii_passes_through() {
        assert_eq!(normalize("Zahnrad ÜBER «x»"), toks(&["zahnrad", "Über", "«x»"]));
    }

    #[test]
    fn articles() {
        let t = toks(&["the", "a", "sun", "gear"]);
        assert_eq!(strip_articles(&t), &t[2..]);
        let t = toks(&["sun", "the"]);
        assert_eq!(strip_articles(&t), &t[..]);
    }
}
