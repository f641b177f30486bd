//! The four-message prompt chain sent for each document.

use std::fmt;
use std::path::{Path, PathBuf};

use annoteval_core::{AnnotatedDocument, Typology};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LlmError;

/// Long prompts carry each category's definition; short prompts only the
/// numbered codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Long,
    Short,
}

impl PromptVariant {
    pub fn include_definitions(self) -> bool {
        matches!(self, PromptVariant::Long)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptVariant::Long => "long",
            PromptVariant::Short => "short",
        })
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" => Ok(PromptVariant::Long),
            "short" => Ok(PromptVariant::Short),
            other => Err(format!(
                "unknown prompt variant {other:?} (expected long or short)"
            )),
        }
    }
}

/// Message templates. `{typology}`, `{source}` and `{target}` are substituted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub language: String,
    pub instructions: String,
    pub typology: String,
    pub text: String,
    pub table: String,
}

const FR_INSTRUCTIONS: &str = "\
Tâche : annoter une traduction
Objectif : repérer des erreurs sur la base d’une typologie d’erreurs que je te fournis.
Type de texte : résumé d’article scientifique dans le domaine du TAL
Fichier joint : MANUEL D’ANNOTATION, qui contient des explications plus détaillées et des exemples des types d’erreurs que je vais te fournir ci-dessous.
Présentation de la sortie :
- 1re phrase source
- 1re phrase cible dans la traduction
- liste les erreurs
Etc. jusqu’à la fin de la traduction
---------------
Je vais te donner la typologie d’erreurs.";

const FR_TYPOLOGY: &str = "\
Typologie d’erreurs à suivre méticuleusement : veille à utiliser les types d’erreurs présents et n’en invente aucun. De même, respecte les codes liés à chaque type d’erreur à la lettre ; ne prends donc aucune liberté.
Explication de la typologie : elle est divisée en 3 grandes catégories d’erreurs : les erreurs de transfert de contenu (erreurs altérant le sens du message ou entravant sa compréhension), les erreurs de langue, et les erreurs liées aux outils ou à leur maîtrise.
Voici la typologie :
{typology}-----------
- Prête attention à tous les aspects, autant le transfert de contenu que la langue et la terminologie et les erreurs liées aux outils.
- Si tu as besoin d’exemples, réfère toi au manuel d’annotation en pièce jointe.
-----------
Je vais te donner la traduction à évaluer avec son texte source.";

const FR_TEXT: &str = "\
Voici le texte source et sa traduction à annoter :
{source}
{target}
----------
PROCÈDE À L’ANNOTATION. Attention, n’annote QUE les erreurs, pas des améliorations ou suggestions ! Il peut y avoir plusieurs erreurs dans une même phrase.";

const FR_TABLE: &str = "\
Convertis maintenant toutes tes annotations en un seul tableau, sans autre texte, avec exactement ces colonnes :
| Phrase | Erreur | Code | Explication |
- Phrase : numéro de la phrase cible (la première phrase porte le numéro 1).
- Erreur : le segment erroné, recopié à l’identique depuis la traduction.
- Code : un seul code de la typologie par ligne ; si une erreur relève de plusieurs codes, choisis le plus pertinent.
- Explication : une courte justification.
Si une phrase ne contient aucune erreur, écris une ligne avec « aucune erreur » dans la colonne Erreur.";

impl PromptTemplates {
    pub fn french() -> PromptTemplates {
        PromptTemplates {
            language: "fr".into(),
            instructions: FR_INSTRUCTIONS.into(),
            typology: FR_TYPOLOGY.into(),
            text: FR_TEXT.into(),
            table: FR_TABLE.into(),
        }
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates::french()
    }
}

/// A file sent along with the first message. Only its name and digest are
/// recorded; the content is never interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub file_name: String,
    #[serde(skip)]
    pub path: PathBuf,
    pub sha256: String,
    pub size: u64,
}

impl Attachment {
    pub fn from_path(path: &Path) -> Result<Attachment, LlmError> {
        let bytes = std::fs::read(path).map_err(|e| LlmError::io(path.display().to_string(), e))?;
        Ok(Attachment {
            file_name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "attachment".into()),
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            size: bytes.len() as u64,
        })
    }

    pub fn read(&self) -> Result<Vec<u8>, LlmError> {
        std::fs::read(&self.path).map_err(|e| LlmError::io(self.path.display().to_string(), e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptChain {
    pub doc_id: String,
    pub variant: PromptVariant,
    pub language: String,
    /// Instructions, typology, text, table request.
    pub steps: Vec<String>,
    pub attachment: Option<Attachment>,
}

/// Builds the chain with the bundled French templates.
pub fn build_chain(
    doc: &AnnotatedDocument,
    typology: &Typology,
    manual: Option<&Path>,
    variant: PromptVariant,
) -> Result<PromptChain, LlmError> {
    build_chain_with(doc, typology, manual, variant, &PromptTemplates::french())
}

pub fn build_chain_with(
    doc: &AnnotatedDocument,
    typology: &Typology,
    manual: Option<&Path>,
    variant: PromptVariant,
    templates: &PromptTemplates,
) -> Result<PromptChain, LlmError> {
    let missing = |what: &str| LlmError::Precondition {
        doc: doc.doc_id.clone(),
        reason: format!("{what} text is empty"),
    };
    if doc.source_text.trim().is_empty() {
        return Err(missing("source"));
    }
    if doc.target_text.trim().is_empty() {
        return Err(missing("target"));
    }
    let block = typology.render_prompt_block(variant.include_definitions());
    let steps = vec![
        templates.instructions.clone(),
        templates.typology.replace("{typology}", &block),
        templates
            .text
            .replace("{source}", doc.source_text.trim())
            .replace("{target}", doc.target_text.trim()),
        templates.table.clone(),
    ];
    Ok(PromptChain {
        doc_id: doc.doc_id.clone(),
        variant,
        language: templates.language.clone(),
        steps,
        attachment: manual.map(Attachment::from_path).transpose()?,
    })
}
