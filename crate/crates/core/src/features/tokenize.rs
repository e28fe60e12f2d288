/// Splits a post into lowercase tokens.
///
/// `#`-prefixed tokens are kept whole as hashtags, URLs and `@`-mentions are
/// dropped, and punctuation is stripped from word edges.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_token).collect()
}

fn is_url(tok: &str) -> bool {
    tok.starts_with("http://") || tok.starts_with("https://") || tok.starts_with("www.")
}

fn normalize_token(raw: &str) -> Option<String> {
    let lower = raw
        .to_lowercase()
        .trim_start_matches(|c: char| !(c.is_alphanumeric() || c == '#' || c == '@'))
        .to_string();
    if lower.starts_with('@') || is_url(&lower) {
        return None;
    }
    if let Some(body) = lower.strip_prefix('#') {
        let body = body.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'));
        if body.is_empty() {
            return None;
        }
        return Some(format!("#{body}"));
    }
    let word = lower.trim_matches(|c: char| !c.is_alphanumeric());
    if word.is_empty() || word.starts_with('@') || is_url(word) {
        return None;
    }
    Some(word.to_string())
}

pub fn is_hashtag(token: &str) -> bool {
    token.starts_with('#')
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_urls_and_punctuation() {
        assert_eq!(
            tokenize("Fruit salad! #Breakfast http://t.co/x"),
            vec!["fruit", "salad", "#breakfast"]
        );
    }

    #[test]
    fn drops_mentions_and_bare_symbols() {
        assert_eq!(tokenize("@amy mac & cheese"), vec!["mac", "cheese"]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
    }

    #[test]
    fn hashtag_edges() {
        assert_eq!(tokenize("#Dinner!! (#brunch) # ##"), vec!["#dinner", "#brunch"]);
        assert_eq!(tokenize("#mac_n_cheese,"), vec!["#mac_n_cheese"]);
        assert_eq!(tokenize("don't"), vec!["don't"]);
    }

    #[test]
    fn www_and_https() {
        assert_eq!(tokenize("see https://x.y/z and WWW.food.com"), vec!["see", "and"]);
    }

    proptest! {
        #[test]
        fn idempotent(text in "[a-zA-Z0-9#@&!.,:/' éÜ_\\-]{0,80}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokens_are_lowercase_and_nonempty(text in "\\PC{0,60}") {
            for tok in tokenize(&text) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_whitespace));
                prop_assert_eq!(tok.to_lowercase(), tok.clone());
            }
        }
    }
}
