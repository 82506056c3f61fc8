//! Raw author-string parsing and normalisation.
//!
//! Input bylines are `Given Family` or `F. M. Family`. The last token is
//! the family name (absorbing preceding lowercase particles such as
//! `van` or `de`); the first remaining token is the given name or a
//! given initial, and everything between contributes middle initials.

/// Lowercases and folds common Latin diacritics to ASCII so lookups and
/// comparisons are accent-insensitive.
pub fn fold(s: &str) -> String {
    s.chars()
        .flat_map(|c| {
            let lower = c.to_lowercase().next().unwrap_or(c);
            match lower {
                'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' | 'ā' | 'ă' | 'ą' => vec!['a'],
                'ç' | 'ć' | 'č' | 'ĉ' => vec!['c'],
                'è' | 'é' | 'ê' | 'ë' | 'ē' | 'ĕ' | 'ė' | 'ę' | 'ě' => vec!['e'],
                'ì' | 'í' | 'î' | 'ï' | 'ī' | 'į' | 'ı' => vec!['i'],
                'ñ' | 'ń' | 'ň' => vec!['n'],
                'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ø' | 'ō' | 'ő' => vec!['o'],
                'ù' | 'ú' | 'û' | 'ü' | 'ū' | 'ů' | 'ű' => vec!['u'],
                'ý' | 'ÿ' => vec!['y'],
                'ß' => vec!['s', 's'],
                'æ' => vec!['a', 'e'],
                'œ' => vec!['o', 'e'],
                'ð' => vec!['d'],
                'þ' => vec!['t', 'h'],
                'ž' | 'ź' | 'ż' => vec!['z'],
                'š' | 'ś' | 'ş' => vec!['s'],
                'ł' => vec!['l'],
                'đ' | 'ď' => vec!['d'],
                'ť' => vec!['t'],
                'ř' => vec!['r'],
                'ğ' => vec!['g'],
                other => vec![other],
            }
        })
        .collect()
}

/// Family-name particles absorbed into the family token.
const PARTICLES: &[&str] = &[
    "van", "der", "den", "de", "von", "da", "del", "della", "di", "la", "le", "ter", "ten", "dos",
    "du", "el", "al", "bin", "ibn", "mac", "st.",
];

/// The given-name portion of a parsed byline entry.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Given {
    /// A spelled-out given name, original casing preserved.
    Name(String),
    /// An initial only (`R.` / `R`), uppercased.
    Initial(char),
}

impl Given {
    pub fn initial(&self) -> char {
        match self {
            Given::Name(n) => fold(n)
                .chars()
                .next()
                .map(|c| c.to_ascii_uppercase())
                .unwrap_or('?'),
            Given::Initial(c) => *c,
        }
    }

    pub fn as_name(&self) -> Option<&str> {
        match self {
            Given::Name(n) => Some(n),
            Given::Initial(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParsedName {
    pub family: String,
    /// `None` when the byline held just one token (a bare family name).
    pub given: Option<Given>,
    /// Uppercased middle initials in byline order.
    pub middles: Vec<char>,
}

impl ParsedName {
    pub fn family_fold(&self) -> String {
        fold(&self.family)
    }

    pub fn given_fold(&self) -> Option<String> {
        self.given
            .as_ref()
            .and_then(Given::as_name)
            .map(fold)
    }

    /// First + middle initials, used for initials-resolution matching.
    pub fn initials(&self) -> Vec<char> {
        let mut out = Vec::with_capacity(1 + self.middles.len());
        if let Some(g) = &self.given {
            out.push(g.initial());
        }
        out.extend(&self.middles);
        out
    }

    pub fn is_initials_only(&self) -> bool {
        !matches!(self.given, Some(Given::Name(_)))
    }

    /// Canonical display form, e.g. `Raymond J. Dolan` or `R. J. Dolan`.
    pub fn display(&self) -> String {
        let mut parts = Vec::new();
        match &self.given {
            Some(Given::Name(n)) => parts.push(n.clone()),
            Some(Given::Initial(c)) => parts.push(format!("{c}.")),
            None => {}
        }
        for m in &self.middles {
            parts.push(format!("{m}."));
        }
        parts.push(self.family.clone());
        parts.join(" ")
    }
}

/// True for tokens that encode initials rather than a name: one letter
/// (with optional periods) or a short all-uppercase run like `RJ`.
fn is_initials_token(token: &str) -> bool {
    let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() || letters.len() != token.chars().filter(|c| *c != '.').count() {
        return false;
    }
    letters.len() == 1 || (letters.len() <= 3 && letters.iter().all(|c| c.is_uppercase()))
}

fn initials_of(token: &str) -> impl Iterator<Item = char> + '_ {
    token
        .chars()
        .filter(|c| c.is_alphabetic())
        .map(|c| c.to_ascii_uppercase())
}

/// Parses one byline entry. Returns `None` on an empty string.
pub fn parse_author(raw: &str) -> Option<ParsedName> {
    let tokens: Vec<&str> = raw.split_whitespace().collect();
    if tokens.is_empty() {
        return None;
    }
    if tokens.len() == 1 {
        return Some(ParsedName {
            family: tokens[0].to_string(),
            given: None,
            middles: Vec::new(),
        });
    }
    // Family = last token plus any immediately preceding particles, as
    // long as at least one token is left for the given name.
    let mut family_start = tokens.len() - 1;
    while family_start > 1 && PARTICLES.contains(&fold(tokens[family_start - 1]).as_str()) {
        family_start -= 1;
    }
    let family = tokens[family_start..].join(" ");
    let given_tokens = &tokens[..family_start];

    let first = given_tokens[0];
    let mut middles: Vec<char> = Vec::new();
    let given = if is_initials_token(first) {
        let mut it = initials_of(first);
        let lead = it.next()?;
        middles.extend(it);
        Some(Given::Initial(lead))
    } else {
        Some(Given::Name(first.trim_end_matches('.').to_string()))
    };
    for token in &given_tokens[1..] {
        if is_initials_token(token) {
            middles.extend(initials_of(token));
        } else if let Some(c) = fold(token).chars().next() {
            // A spelled-out middle name contributes its initial.
            middles.push(c.to_ascii_uppercase());
        }
    }
    Some(ParsedName {
        family,
        given,
        middles,
    })
}
