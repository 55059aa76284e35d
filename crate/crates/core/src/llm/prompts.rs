//! Versioned prompt templates.
//!
//! Each asset starts with `# key: value` header lines followed by `[section]`
//! blocks. `[system]` and `[user]` are always present; other sections are
//! optional user parts. Placeholders use `{{name}}`.

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub version: u32,
    sections: BTreeMap<String, String>,
}

macro_rules! asset {
    ($file:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/prompts/", $file))
    };
}

pub const ABSTRACT_TASK: &str = asset!("abstract_task.v1.txt");
pub const CONCRETIZE: &str = asset!("concretize.v1.txt");
pub const WEBPAGE_CONTEXT: &str = asset!("webpage_context.v1.txt");
pub const NEXT_STEP: &str = asset!("next_step.v1.txt");
pub const DESCRIBE_ELEMENTS: &str = asset!("describe_elements.v1.txt");
pub const SELECT_ACTION: &str = asset!("select_action.v1.txt");

pub const ALL: &[&str] = &[
    ABSTRACT_TASK,
    CONCRETIZE,
    WEBPAGE_CONTEXT,
    NEXT_STEP,
    DESCRIBE_ELEMENTS,
    SELECT_ACTION,
];

impl PromptTemplate {
    pub fn parse(src: &str) -> Result<Self, String> {
        let mut name = None;
        let mut version = None;
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in src.lines() {
            if current.is_none() {
                if let Some(h) = line.strip_prefix("# ") {
                    if let Some((k, v)) = h.split_once(':') {
                        match k.trim() {
                            "template" => name = Some(v.trim().to_string()),
                            "version" => version = v.trim().parse().ok(),
                            _ => {}
                        }
                    }
                    continue;
                }
            }
            let trimmed = line.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') && !trimmed.contains(' ') {
                let sec = trimmed[1..trimmed.len() - 1].to_string();
                sections.insert(sec.clone(), String::new());
                current = Some(sec);
                continue;
            }
            match &current {
                Some(sec) => {
                    let body = sections.get_mut(sec).expect("section exists");
                    if !body.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(line);
                }
                None if trimmed.is_empty() => {}
                None => return Err(format!("text outside a section: {line:?}")),
            }
        }
        let name = name.ok_or("missing template header")?;
        let version = version.ok_or("missing version header")?;
        for required in ["system", "user"] {
            if !sections.contains_key(required) {
                return Err(format!("{name}: missing [{required}] section"));
            }
        }
        Ok(PromptTemplate {
            name,
            version,
            sections,
        })
    }

    /// Parses a bundled asset; bundled assets are covered by tests.
    pub fn bundled(src: &str) -> Self {
        Self::parse(src).expect("bundled prompt template parses")
    }

    pub fn system(&self) -> &str {
        &self.sections["system"]
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    /// Substitutes `{{key}}` placeholders. Unknown placeholders are an error.
    pub fn render(&self, section: &str, vars: &[(&str, &str)]) -> Result<String, String> {
        let body = self
            .sections
            .get(section)
            .ok_or_else(|| format!("{}: no section [{section}]", self.name))?;
        let mut out = String::with_capacity(body.len());
        let mut rest = body.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after
                .find("}}")
                .ok_or_else(|| format!("{}: unterminated placeholder", self.name))?;
            let key = after[..end].trim();
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| format!("{}: no value for {{{{{key}}}}}", self.name))?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
