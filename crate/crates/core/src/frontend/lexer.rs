use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const PUNCT: &[&str] = &["++", "(", ")", "{", "}", "[", "]", ";", ",", "=", "<", "+", "-", "*", "/"];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for &b in &bytes[*i..*i + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };

    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if bytes[i..].starts_with(b"//") {
            let n = bytes[i..].iter().position(|&b| b == b'\n').unwrap_or(bytes.len() - i);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if bytes[i..].starts_with(b"/*") {
            let Some(end) = src[i + 2..].find("*/") else {
                return Err(ParseError::Syntax { line, column: col, message: "unterminated comment".into() });
            };
            advance(&mut i, &mut line, &mut col, end + 4);
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == b'_' {
            let n = bytes[i..].iter().take_while(|b| b.is_ascii_alphanumeric() || **b == b'_').count();
            let text = src[i..i + n].to_string();
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token { tok: Tok::Ident(text), line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let mut n = bytes[i..].iter().take_while(|b| b.is_ascii_digit() || **b == b'.').count();
            // exponent
            if matches!(bytes.get(i + n), Some(b'e' | b'E')) {
                let mut k = i + n + 1;
                if matches!(bytes.get(k), Some(b'+' | b'-')) {
                    k += 1;
                }
                let digits = bytes[k..].iter().take_while(|b| b.is_ascii_digit()).count();
                if digits > 0 {
                    n = k + digits - i;
                }
            }
            let text = &src[i..i + n];
            if text.parse::<f64>().is_err() {
                return Err(ParseError::Syntax {
                    line,
                    column: col,
                    message: format!("malformed number `{text}`"),
                });
            }
            out.push(Token { tok: Tok::Num(text.to_string()), line: start_line, column: start_col });
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        match PUNCT.iter().find(|p| bytes[i..].starts_with(p.as_bytes())) {
            Some(p) => {
                advance(&mut i, &mut line, &mut col, p.len());
                out.push(Token { tok: Tok::Punct(p), line: start_line, column: start_col });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax { line, column: col, message: format!("unexpected character `{ch}`") });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_punct() {
        let toks = tokenize("a[i]=1.5e-3+2; i++").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[5], Tok::Num("1.5e-3".into()));
        assert!(kinds.contains(&Tok::Punct("++")));
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("x\n  y").unwrap();
        assert_eq!((toks[1].line, toks[1].column), (2, 3));
    }

    #[test]
    fn bad_char() {
        assert!(matches!(tokenize("a $ b"), Err(ParseError::Syntax { column: 3, .. })));
    }
}
