use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Function,
    Var,
    Return,
    If,
    Else,
    While,
    For,
    In,
    True,
    False,
    Null,
    This,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,
    Plus,
    Minus,
    Bang,
    Lt,
    Gt,
    Le,
    Ge,
    EqEq,
    NotEq,
    EqEqEq,
    NotEqEq,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Function => "function",
            Tok::Var => "var",
            Tok::Return => "return",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::For => "for",
            Tok::In => "in",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Null => "null",
            Tok::This => "this",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Bang => "!",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::EqEqEq => "===",
            Tok::NotEqEq => "!==",
            Tok::Ident(_) | Tok::Num(_) | Tok::Str(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 0u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 0;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (sl, sc) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::new(sl, sc, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            keyword(&word).unwrap_or(Tok::Ident(word))
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let n = text
                .parse::<f64>()
                .map_err(|_| SyntaxError::new(tl, tc, format!("malformed number `{text}`")))?;
            Tok::Num(n)
        } else if c == '"' || c == '\'' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(SyntaxError::new(tl, tc, "unterminated string literal"))
                    }
                    Some(&q) if q == c => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        bump!();
                        let e = *chars
                            .get(i)
                            .ok_or_else(|| SyntaxError::new(tl, tc, "unterminated string literal"))?;
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            Tok::Str(s)
        } else {
            let next = chars.get(i + 1).copied();
            let next2 = chars.get(i + 2).copied();
            let (tok, len) = match (c, next, next2) {
                ('=', Some('='), Some('=')) => (Tok::EqEqEq, 3),
                ('!', Some('='), Some('=')) => (Tok::NotEqEq, 3),
                ('=', Some('='), _) => (Tok::EqEq, 2),
                ('!', Some('='), _) => (Tok::NotEq, 2),
                ('<', Some('='), _) => (Tok::Le, 2),
                ('>', Some('='), _) => (Tok::Ge, 2),
                ('=', ..) => (Tok::Assign, 1),
                ('!', ..) => (Tok::Bang, 1),
                ('<', ..) => (Tok::Lt, 1),
                ('>', ..) => (Tok::Gt, 1),
                ('(', ..) => (Tok::LParen, 1),
                (')', ..) => (Tok::RParen, 1),
                ('{', ..) => (Tok::LBrace, 1),
                ('}', ..) => (Tok::RBrace, 1),
                ('[', ..) => (Tok::LBracket, 1),
                (']', ..) => (Tok::RBracket, 1),
                (',', ..) => (Tok::Comma, 1),
                (';', ..) => (Tok::Semi, 1),
                (':', ..) => (Tok::Colon, 1),
                ('.', ..) => (Tok::Dot, 1),
                ('+', ..) => (Tok::Plus, 1),
                ('-', ..) => (Tok::Minus, 1),
                _ => {
                    return Err(SyntaxError::new(
                        tl,
                        tc,
                        format!("unexpected character `{c}`"),
                    ))
                }
            };
            for _ in 0..len {
                bump!();
            }
            tok
        };
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "function" => Tok::Function,
        "var" => Tok::Var,
        "return" => Tok::Return,
        "if" => Tok::If,
        "else" => Tok::Else,
        "while" => Tok::While,
        "for" => Tok::For,
        "in" => Tok::In,
        "true" => Tok::True,
        "false" => Tok::False,
        "null" => Tok::Null,
        "this" => Tok::This,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based_lines_zero_based_cols() {
        let toks = tokenize("var x;\n  x = 'a';").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 0));
        assert_eq!(toks[3].tok, Tok::Ident("x".into()));
        assert_eq!((toks[3].line, toks[3].col), (2, 2));
        assert_eq!(toks[5].tok, Tok::Str("a".into()));
    }

    #[test]
    fn operators_take_longest_match() {
        let toks: Vec<Tok> = tokenize("a === b !== c <= d")
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect();
        assert!(toks.contains(&Tok::EqEqEq));
        assert!(toks.contains(&Tok::NotEqEq));
        assert!(toks.contains(&Tok::Le));
    }

    #[test]
    fn comments_are_skipped() {
        let toks = tokenize("// hi\n/* a\n b */ x").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("x".into()));
        assert_eq!(toks[0].line, 3);
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let err = tokenize("var s = \"abc").unwrap_err();
        assert_eq!((err.line, err.col), (1, 8));
    }
}
