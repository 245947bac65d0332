//! Fixed label tables for the reference vocabularies. Counts beyond a table's
//! length get synthetic labels.

pub(crate) const TOPICS: &[&str] = &[
    "politics",
    "economy",
    "science",
    "sports",
    "culture",
    "technology",
    "health",
    "education",
    "environment",
    "travel",
    "religion",
    "law",
    "defense",
    "business",
    "media",
    "fashion",
    "food",
    "music",
    "cinema",
    "literature",
    "history",
    "weather",
    "space",
    "transport",
];

pub(crate) const LANGUAGES: &[(&str, &str)] = &[
    ("en", "en-US"),
    ("es", "es-ES"),
    ("fr", "fr-FR"),
    ("de", "de-DE"),
    ("pt", "pt-BR"),
    ("it", "it-IT"),
    ("ca", "ca-ES"),
    ("nl", "nl-NL"),
    ("ru", "ru-RU"),
    ("zh", "zh-CN"),
    ("ja", "ja-JP"),
    ("ar", "ar-EG"),
    ("en", "en-GB"),
    ("es", "es-MX"),
    ("fr", "fr-CA"),
    ("pt", "pt-PT"),
];

pub(crate) const COUNTRIES: &[(&str, &str)] = &[
    ("United States", "US"),
    ("Spain", "ES"),
    ("France", "FR"),
    ("Germany", "DE"),
    ("Brazil", "BR"),
    ("Italy", "IT"),
    ("United Kingdom", "GB"),
    ("Netherlands", "NL"),
    ("Russia", "RU"),
    ("China", "CN"),
    ("Japan", "JP"),
    ("Egypt", "EG"),
    ("Mexico", "MX"),
    ("Canada", "CA"),
    ("Portugal", "PT"),
    ("Argentina", "AR"),
    ("Chile", "CL"),
    ("India", "IN"),
    ("Australia", "AU"),
    ("South Africa", "ZA"),
    ("Nigeria", "NG"),
    ("Kenya", "KE"),
    ("Turkey", "TR"),
    ("Greece", "GR"),
    ("Sweden", "SE"),
    ("Norway", "NO"),
    ("Poland", "PL"),
    ("Ukraine", "UA"),
    ("Iran", "IR"),
    ("Israel", "IL"),
    ("South Korea", "KR"),
    ("Indonesia", "ID"),
    ("Vietnam", "VN"),
    ("Colombia", "CO"),
    ("Peru", "PE"),
    ("Morocco", "MA"),
    ("Ireland", "IE"),
    ("Belgium", "BE"),
    ("Switzerland", "CH"),
    ("Austria", "AT"),
];

pub(crate) const JOURNALS: &[&str] = &[
    "The Morning Ledger",
    "Evening Courier",
    "The Harbor Gazette",
    "Northern Dispatch",
    "The Civic Herald",
    "Weekly Observer",
    "The Plain Record",
    "Capital Tribune",
    "The Valley Post",
    "Coastal Chronicle",
];

/// Terms injected into bodies at a low rate so searches for well-known names
/// have hits. None of them can collide with a generated word.
pub(crate) const NOTABLE_TERMS: &[&str] = &["obama", "higgs", "cleopatra", "star trek"];
