//! Language registry: canonical names, aliases, keyword lists and comment
//! syntax for the languages the toolkit knows about.
//!
//! Names outside the registry are still accepted by the corpus loader; they
//! are kept verbatim (trimmed) and simply have no keyword list.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LanguageInfo {
    pub name: String,
    pub keywords: Vec<&'static str>,
    /// Line-comment prefixes, longest first.
    pub line_comments: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct Registry {
    languages: BTreeMap<String, LanguageInfo>,
    /// lowercase alias -> canonical name
    aliases: BTreeMap<String, String>,
}

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while",
];

const CPP_EXTRA: &[&str] = &[
    "bool", "catch", "class", "constexpr", "delete", "explicit", "false", "friend", "namespace",
    "new", "nullptr", "operator", "private", "protected", "public", "template", "this", "throw",
    "true", "try", "typename", "using", "virtual",
];

const CSHARP_KEYWORDS: &[&str] = &[
    "abstract", "as", "base", "bool", "break", "case", "catch", "char", "class", "const",
    "continue", "decimal", "default", "do", "double", "else", "enum", "false", "finally", "float",
    "for", "foreach", "if", "in", "int", "interface", "internal", "is", "long", "namespace", "new",
    "null", "object", "out", "override", "private", "protected", "public", "readonly", "ref",
    "return", "static", "string", "struct", "switch", "this", "throw", "true", "try", "using",
    "var", "virtual", "void", "while",
];

const GO_KEYWORDS: &[&str] = &[
    "break", "case", "chan", "const", "continue", "default", "defer", "else", "fallthrough",
    "for", "func", "go", "goto", "if", "import", "interface", "map", "package", "range", "return",
    "select", "struct", "switch", "type", "var",
];

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "boolean", "break", "byte", "case", "catch", "char", "class", "continue",
    "default", "do", "double", "else", "enum", "extends", "final", "finally", "float", "for", "if",
    "implements", "import", "instanceof", "int", "interface", "long", "new", "null", "package",
    "private", "protected", "public", "return", "short", "static", "super", "switch", "this",
    "throw", "throws", "try", "void", "while",
];

const JS_KEYWORDS: &[&str] = &[
    "async", "await", "break", "case", "catch", "class", "const", "continue", "default",
    "delete", "do", "else", "export", "extends", "false", "finally", "for", "function", "if",
    "import", "in", "instanceof", "let", "new", "null", "return", "switch", "this", "throw",
    "true", "try", "typeof", "undefined", "var", "while", "yield",
];

const KOTLIN_KEYWORDS: &[&str] = &[
    "as", "break", "class", "continue", "data", "do", "else", "false", "for", "fun", "if",
    "import", "in", "interface", "is", "null", "object", "override", "package", "private",
    "return", "super", "this", "throw", "true", "try", "val", "var", "when", "while",
];

const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

const RUBY_KEYWORDS: &[&str] = &[
    "begin", "break", "case", "class", "def", "do", "else", "elsif", "end", "ensure", "false",
    "for", "if", "in", "module", "next", "nil", "not", "or", "and", "puts", "redo", "rescue",
    "retry", "return", "self", "super", "then", "true", "unless", "until", "when", "while",
    "yield",
];

const RUST_KEYWORDS: &[&str] = &[
    "as", "break", "const", "continue", "crate", "else", "enum", "extern", "false", "fn", "for",
    "if", "impl", "in", "let", "loop", "match", "mod", "move", "mut", "pub", "ref", "return",
    "self", "Self", "static", "struct", "super", "trait", "true", "type", "unsafe", "use",
    "where", "while",
];

const SLASH: &[&str] = &["//"];
const HASH: &[&str] = &["#"];

impl Registry {
    /// The ten languages of the reference dataset plus their common aliases.
    pub fn builtin() -> Self {
        let cpp: Vec<&'static str> = C_KEYWORDS.iter().chain(CPP_EXTRA).copied().collect();
        let table: Vec<(&str, Vec<&'static str>, &[&'static str], &[&str])> = vec![
            ("C++", cpp, SLASH, &["cpp", "c plus plus", "cplusplus"]),
            ("C", C_KEYWORDS.to_vec(), SLASH, &[]),
            ("C#", CSHARP_KEYWORDS.to_vec(), SLASH, &["c sharp", "csharp", "c-sharp"]),
            ("Go", GO_KEYWORDS.to_vec(), SLASH, &["golang"]),
            ("Java", JAVA_KEYWORDS.to_vec(), SLASH, &[]),
            ("JavaScript", JS_KEYWORDS.to_vec(), SLASH, &["js", "ecmascript", "node.js"]),
            ("Kotlin", KOTLIN_KEYWORDS.to_vec(), SLASH, &["kt"]),
            ("Python", PYTHON_KEYWORDS.to_vec(), HASH, &["py", "python3"]),
            ("Ruby", RUBY_KEYWORDS.to_vec(), HASH, &["rb"]),
            ("Rust", RUST_KEYWORDS.to_vec(), SLASH, &["rs"]),
        ];
        let mut reg = Registry {
            languages: BTreeMap::new(),
            aliases: BTreeMap::new(),
        };
        for (name, mut keywords, comments, aliases) in table {
            keywords.sort_unstable();
            keywords.dedup();
            reg.aliases.insert(name.to_lowercase(), name.to_string());
            for alias in aliases {
                reg.aliases.insert(alias.to_lowercase(), name.to_string());
            }
            reg.languages.insert(
                name.to_string(),
                LanguageInfo {
                    name: name.to_string(),
                    keywords,
                    line_comments: comments.to_vec(),
                },
            );
        }
        reg
    }

    /// Adds aliases from an `alias<TAB>canonical` file. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn load_aliases(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (alias, canonical) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected `alias<TAB>canonical`".into(),
            })?;
            self.add_alias(alias.trim(), canonical.trim());
        }
        Ok(())
    }

    pub fn add_alias(&mut self, alias: &str, canonical: &str) {
        let canonical = self.canonicalize(canonical);
        self.aliases.insert(alias.to_lowercase(), canonical);
    }

    /// Case-insensitive lookup through the alias table. Unknown names are
    /// returned trimmed but otherwise unchanged.
    pub fn canonicalize(&self, name: &str) -> String {
        let trimmed = name.trim();
        self.aliases
            .get(&trimmed.to_lowercase())
            .cloned()
            .unwrap_or_else(|| trimmed.to_string())
    }

    pub fn info(&self, name: &str) -> Option<&LanguageInfo> {
        self.languages.get(&self.canonicalize(name))
    }

    pub fn keywords(&self, name: &str) -> Result<&[&'static str]> {
        self.info(name)
            .map(|i| i.keywords.as_slice())
            .ok_or_else(|| Error::UnknownLanguage(name.to_string()))
    }

    pub fn known(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(String::as_str)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Filesystem-safe rendering of a language name (`C++` -> `Cpp`, `C#` -> `CSharp`).
pub fn file_stem(name: &str) -> String {
    name.replace("++", "pp").replace('#', "Sharp").replace([' ', '/'], "_")
}
