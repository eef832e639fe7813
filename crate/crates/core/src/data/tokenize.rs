/// Lower-cases `text`, splits on whitespace and separates every ASCII
/// punctuation character into its own token. Apostrophes inside a word
/// (`don't`, `c'mon`) are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let inner_apostrophe = (c == '\'' || c == '’')
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if c.is_ascii_punctuation() && !inner_apostrophe {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            tokenize("Hi, Ross!  How're you?"),
            vec!["hi", ",", "ross", "!", "how're", "you", "?"]
        );
    }

    #[test]
    fn handles_ellipsis_and_quotes() {
        assert_eq!(tokenize("'Well...'"), vec!["'", "well", ".", ".", ".", "'"]);
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("   ").is_empty());
    }
}
