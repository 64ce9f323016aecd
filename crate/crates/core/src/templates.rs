//! Orchestrator prompt templates. The three-part prompt (system, develop,
//! user) ships as versioned text documents with `[MODEL]`, `[MODEL_LIST]`
//! and `[QUESTION]` slots; assembled prompts are content-addressed so a
//! report can pin exactly which template bytes produced it.

use std::path::Path;

use crate::protocol::DomLevel;
use crate::util::fnv1a64_hex;

const LOW_SYSTEM: &str = include_str!("templates/low_system.txt");
const LOW_DEVELOP: &str = include_str!("templates/low_develop.txt");
const LOW_USER: &str = include_str!("templates/low_user.txt");
const HIGH_SYSTEM: &str = include_str!("templates/high_system.txt");
const HIGH_DEVELOP: &str = include_str!("templates/high_develop.txt");
const HIGH_USER: &str = include_str!("templates/high_user.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub dom: DomLevel,
    pub system: String,
    pub develop: String,
    pub user: String,
}

impl PromptTemplates {
    /// The templates compiled into the crate.
    pub fn builtin(dom: DomLevel) -> PromptTemplates {
        match dom {
            DomLevel::Low => PromptTemplates {
                dom,
                system: LOW_SYSTEM.to_string(),
                develop: LOW_DEVELOP.to_string(),
                user: LOW_USER.to_string(),
            },
            DomLevel::High => PromptTemplates {
                dom,
                system: HIGH_SYSTEM.to_string(),
                develop: HIGH_DEVELOP.to_string(),
                user: HIGH_USER.to_string(),
            },
        }
    }

    /// Loads `<dir>/<dom>/{system,develop,user}.txt`.
    pub fn from_dir(dir: &Path, dom: DomLevel) -> std::io::Result<PromptTemplates> {
        let base = dir.join(dom.to_string());
        Ok(PromptTemplates {
            dom,
            system: std::fs::read_to_string(base.join("system.txt"))?,
            develop: std::fs::read_to_string(base.join("develop.txt"))?,
            user: std::fs::read_to_string(base.join("user.txt"))?,
        })
    }

    /// Stable content hash over all three documents.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        buf.extend_from_slice(self.system.as_bytes());
        buf.push(0);
        buf.extend_from_slice(self.develop.as_bytes());
        buf.push(0);
        buf.extend_from_slice(self.user.as_bytes());
        fnv1a64_hex(&buf)
    }

    /// System message with the sub-agent model substituted.
    pub fn render_system(&self, model: &str) -> String {
        self.system.replace("[MODEL]", model)
    }

    /// User message: develop block, then the task-bearing user block.
    pub fn render_user(&self, question: &str, model_list: &str) -> String {
        format!(
            "{}\n\n{}",
            self.develop.replace("[MODEL_LIST]", model_list),
            self.user.replace("[QUESTION]", question)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_have_slots() {
        for dom in [DomLevel::Low, DomLevel::High] {
            let t = PromptTemplates::builtin(dom);
            assert!(t.system.contains("[MODEL]"), "{dom} system");
            assert!(t.user.contains("[QUESTION]"), "{dom} user");
            assert!(!t.develop.is_empty());
        }
    }

    #[test]
    fn substitution_fills_slots() {
        let t = PromptTemplates::builtin(DomLevel::Low);
        let sys = t.render_system("gpt-oss-120b");
        assert!(sys.contains("gpt-oss-120b"));
        assert!(!sys.contains("[MODEL]"));
        let user = t.render_user("What is 2+2?", "gpt-oss-120b");
        assert!(user.contains("What is 2+2?"));
        assert!(!user.contains("[QUESTION]"));
    }

    #[test]
    fn content_hash_pins_bytes() {
        let a = PromptTemplates::builtin(DomLevel::High);
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.user.push(' ');
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn dir_round_trip() {
        let dir = std::env::temp_dir().join(format!("maestro-templates-{}", std::process::id()));
        for dom in [DomLevel::Low, DomLevel::High] {
            let t = PromptTemplates::builtin(dom);
            let base = dir.join(dom.to_string());
            std::fs::create_dir_all(&base).unwrap();
            std::fs::write(base.join("system.txt"), &t.system).unwrap();
            std::fs::write(base.join("develop.txt"), &t.develop).unwrap();
            std::fs::write(base.join("user.txt"), &t.user).unwrap();
            let loaded = PromptTemplates::from_dir(&dir, dom).unwrap();
            assert_eq!(loaded, t);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
