//! Prompt construction for aspect induction and argument extraction.

use crate::domain::{AspectTaxonomy, Review};

/// The three-line argument scheme rendered into every extraction prompt.
/// Patterns carry `{A}`, `{S}`, `{X}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasTemplate {
    pub claim_pattern: String,
    pub major_premise_pattern: String,
    pub minor_premise_pattern: String,
}

impl Default for RasTemplate {
    fn default() -> Self {
        RasTemplate {
            claim_pattern: "{A} of this product is {S}".to_owned(),
            major_premise_pattern: "{X} is a sign that {A} is {S}".to_owned(),
            minor_premise_pattern: "The user observes {X} about {A}".to_owned(),
        }
    }
}

impl RasTemplate {
    /// Render the scheme with the given slot values (the extraction prompt
    /// passes the placeholder letters themselves so the model fills them).
    pub fn render(&self, aspect: &str, sentiment: &str, evidence: &str) -> String {
        let fill = |pattern: &str| {
            pattern
                .replace("{A}", aspect)
                .replace("{S}", sentiment)
                .replace("{X}", evidence)
        };
        format!(
            "Claim: {}\nMajor Premise: {}\nMinor Premise: {}",
            fill(&self.claim_pattern),
            fill(&self.major_premise_pattern),
            fill(&self.minor_premise_pattern),
        )
    }
}

/// Prompt asking the model to list the critical aspects of a product
/// category, as a JSON array of strings.
pub fn build_induction_prompt(category: &str) -> String {
    format!(
        "List the critical aspects of a product in the category \"{category}\". \
         The critical aspects are the key evaluation factors that may influence \
         customers' purchase decisions.\n\n\
         Please return the values in JSON format:\n\n\
         [\"aspect\", ...]"
    )
}

/// Prompt asking the model to fill the argument scheme from one review. The
/// aspect slot lists the taxonomy's most popular labels, count-descending
/// with first-seen tie-breaks, capped at `aspect_cap`.
pub fn build_extraction_prompt(
    review: &Review,
    template: &RasTemplate,
    taxonomy: &AspectTaxonomy,
    aspect_cap: usize,
) -> String {
    let aspects = taxonomy.popular_labels(aspect_cap).join(", ");
    let scheme = template.render("A", "S", "X");
    format!(
        "Fill the scheme with the provided review.\n\n\
         {scheme}\n\n\
         Note:\n\
         1. Identify the aspects mentioned in the review. Then provide a new scheme \
         with the relevant evidence for each identified aspect.\n\
         2. The most mentioned aspects are {aspects}.\n\
         3. Only generate a new aspect when there is no matching one above.\n\
         4. Do NOT provide scheme having aspect wasn't mentioned in the text.\n\
         5. Do NOT include too much details in the evidence.\n\n\
         Please return the values in JSON format:\n\n\
         [{{\"aspect\": \"the property / feature of the product\", \
         \"sentiment\": \"positive/negative\", \
         \"evidence\": \"support from the argument\"}}, ...]\n\n\
         Review: {text}",
        text = review.text,
    )
}
