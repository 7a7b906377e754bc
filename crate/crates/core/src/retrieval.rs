//! Evidence retrieval for atoms.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::cache::Cache;
use crate::error::{Error, Result};
use crate::model_builder::{
    truncate_chars, AtomRecord, ContextRecord, ContextSource, CONTENT_CAP, DEFAULT_CONTEXT_PRIOR,
};

/// Environment variable holding the Serper API key.
pub const SERPER_KEY_ENV: &str = "FACTREASON_SERPER_KEY";
pub const WIKIPEDIA_API: &str = "https://en.wikipedia.org/w/api.php";
pub const SERPER_ENDPOINT: &str = "https://google.serper.dev/search";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverSource {
    Wikipedia,
    WebSearch,
    CachedFixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieverConfig {
    pub source: RetrieverSource,
    /// Results kept per atom.
    pub k: usize,
    /// Maximum content length in characters.
    pub content_cap: usize,
}

impl RetrieverConfig {
    pub fn new(source: RetrieverSource, k: usize) -> Result<Self> {
        let c = Self {
            source,
            k,
            content_cap: CONTENT_CAP,
        };
        c.validate()?;
        Ok(c)
    }

    /// 3 results for Wikipedia, 5 for web search and fixtures.
    pub fn default_for(source: RetrieverSource) -> Self {
        let k = match source {
            RetrieverSource::Wikipedia => 3,
            RetrieverSource::WebSearch | RetrieverSource::CachedFixture => 5,
        };
        Self::new(source, k).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("retriever k must be at least 1".into()));
        }
        if self.content_cap == 0 {
            return Err(Error::InvalidArgument("content cap must be positive".into()));
        }
        Ok(())
    }
}

/// One search result: title, link, snippet and page content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub link: String,
    #[serde(default)]
    pub snippet: String,
    #[serde(default)]
    pub content: String,
}

pub trait Retriever: Send + Sync {
    fn source(&self) -> ContextSource;
    /// Up to `k` results in the provider's rank order.
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>>;
    /// Identifies the provider in cache keys.
    fn name(&self) -> &str;
}

/// Retrieves contexts for one atom, querying with its text. Contexts are
/// named `<atom_id>:<rank>` and their content is cut to the configured cap.
pub fn retrieve(atom: &AtomRecord, config: &RetrieverConfig, retriever: &dyn Retriever) -> Result<Vec<ContextRecord>> {
    config.validate()?;
    let hits = retriever.search(&atom.text, config.k)?;
    Ok(hits
        .into_iter()
        .take(config.k)
        .enumerate()
        .map(|(rank, h)| ContextRecord {
            context_id: format!("{}:{rank}", atom.atom_id),
            title: h.title,
            link: h.link,
            snippet: h.snippet,
            content: truncate_chars(&h.content, config.content_cap),
            source: retriever.source(),
            prior_true: DEFAULT_CONTEXT_PRIOR,
            retrieved_for: BTreeMap::from([(atom.atom_id.clone(), rank)]),
        })
        .collect())
}

/// Serves results from a fixed query → results table. Unknown queries
/// return nothing.
#[derive(Debug, Clone, Default)]
pub struct FixtureRetriever {
    pub results: BTreeMap<String, Vec<SearchHit>>,
    pub source: Option<ContextSource>,
}

impl FixtureRetriever {
    pub fn new(results: BTreeMap<String, Vec<SearchHit>>) -> Self {
        Self { results, source: None }
    }

    /// Reads a JSON object mapping query strings to arrays of hits.
    pub fn from_json(text: &str) -> Result<Self> {
        let results =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad retrieval fixture: {e}")))?;
        Ok(Self::new(results))
    }
}

impl Retriever for FixtureRetriever {
    fn source(&self) -> ContextSource {
        self.source.unwrap_or(ContextSource::Wikipedia)
    }

    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        Ok(self
            .results
            .get(query)
            .map(|h| h.iter().take(k).cloned().collect())
            .unwrap_or_default())
    }

    fn name(&self) -> &str {
        "fixture"
    }
}

fn http_client() -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .user_agent(concat!("factreason/", env!("CARGO_PKG_VERSION")))
        .build()
        .map_err(|e| Error::Transport(e.to_string()))
}

fn is_quota(status: u16, body: &str) -> bool {
    let b = body.to_ascii_lowercase();
    status == 402 || status == 429 && (b.contains("quota") || b.contains("credit")) || b.contains("not enough credits")
}

/// Sends a request built by `make`, retrying connection failures, 429s and
/// server errors. Returns the body of the first successful response.
fn send_with_retries<F>(make: F, max_retries: u32) -> Result<String>
where
    F: Fn() -> reqwest::blocking::RequestBuilder,
{
    let mut tries = 0;
    loop {
        let (retry, err) = match make().send() {
            Ok(resp) => {
                let status = resp.status();
                let body = resp.text().map_err(|e| Error::Transport(e.to_string()))?;
                if status.is_success() {
                    return Ok(body);
                }
                let msg = format!("HTTP {status}: {}", body.chars().take(300).collect::<String>());
                if is_quota(status.as_u16(), &body) {
                    return Err(Error::Quota(msg));
                }
                (
                    status.as_u16() == 429 || status.is_server_error(),
                    Error::Transport(msg),
                )
            }
            Err(e) => (true, Error::Transport(e.to_string())),
        };
        if !retry || tries >= max_retries {
            return Err(err);
        }
        log::warn!("search request failed (attempt {}): {err}", tries + 1);
        std::thread::sleep(Duration::from_millis(500) * 2u32.pow(tries.min(6)));
        tries += 1;
    }
}

/// Wikipedia full-text search followed by plain-text page extracts.
pub struct WikipediaRetriever {
    client: reqwest::blocking::Client,
    api: String,
    max_retries: u32,
}

impl WikipediaRetriever {
    pub fn new(max_retries: u32) -> Result<Self> {
        Self::with_api(WIKIPEDIA_API, max_retries)
    }

    pub fn with_api(api: impl Into<String>, max_retries: u32) -> Result<Self> {
        Ok(Self {
            client: http_client()?,
            api: api.into(),
            max_retries,
        })
    }

    fn get_json(&self, params: &[(&str, &str)]) -> Result<serde_json::Value> {
        let body = send_with_retries(|| self.client.get(&self.api).query(params), self.max_retries)?;
        serde_json::from_str(&body).map_err(|e| Error::Transport(format!("malformed Wikipedia response: {e}")))
    }

    fn extract(&self, title: &str) -> Result<String> {
        let v = self.get_json(&[
            ("action", "query"),
            ("prop", "extracts"),
            ("explaintext", "1"),
            ("redirects", "1"),
            ("format", "json"),
            ("titles", title),
        ])?;
        Ok(v["query"]["pages"]
            .as_object()
            .and_then(|pages| pages.values().next())
            .and_then(|p| p["extract"].as_str())
            .unwrap_or("")
            .to_string())
    }
}

impl Retriever for WikipediaRetriever {
    fn source(&self) -> ContextSource {
        ContextSource::Wikipedia
    }

    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        let limit = k.to_string();
        let v = self.get_json(&[
            ("action", "query"),
            ("list", "search"),
            ("format", "json"),
            ("srsearch", query),
            ("srlimit", &limit),
        ])?;
        let results = v["query"]["search"].as_array().cloned().unwrap_or_default();
        results
            .iter()
            .take(k)
            .map(|r| {
                let title = r["title"].as_str().unwrap_or("").to_string();
                let snippet = strip_html(r["snippet"].as_str().unwrap_or(""));
                let link = format!("https://en.wikipedia.org/wiki/{}", title.replace(' ', "_"));
                let content = self.extract(&title)?;
                Ok(SearchHit {
                    title,
                    link,
                    snippet,
                    content,
                })
            })
            .collect()
    }

    fn name(&self) -> &str {
        "wikipedia"
    }
}

/// Google results through a Serper-compatible endpoint. Page content is
/// fetched from each result link; a failed fetch falls back to the snippet.
pub struct SerperRetriever {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    max_retries: u32,
    fetch_pages: bool,
}

impl SerperRetriever {
    /// Reads the API key from [`SERPER_KEY_ENV`].
    pub fn from_env(max_retries: u32) -> Result<Self> {
        let key = std::env::var(SERPER_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::InvalidArgument(format!("{SERPER_KEY_ENV} is not set")))?;
        Self::new(SERPER_ENDPOINT, key, max_retries)
    }

    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, max_retries: u32) -> Result<Self> {
        Ok(Self {
            client: http_client()?,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            max_retries,
            fetch_pages: true,
        })
    }

    pub fn fetch_pages(mut self, yes: bool) -> Self {
        self.fetch_pages = yes;
        self
    }

    fn page_text(&self, link: &str) -> Option<String> {
        let body = send_with_retries(|| self.client.get(link), 0).ok()?;
        Some(strip_html(&body))
    }
}

/// Organic results of a Serper response.
pub fn parse_serper(body: &str) -> Result<Vec<SearchHit>> {
    #[derive(Deserialize)]
    struct Resp {
        #[serde(default)]
        organic: Vec<SearchHit>,
    }
    let r: Resp =
        serde_json::from_str(body).map_err(|e| Error::Transport(format!("malformed search response: {e}")))?;
    Ok(r.organic)
}

impl Retriever for SerperRetriever {
    fn source(&self) -> ContextSource {
        ContextSource::WebSearch
    }

    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        let payload = serde_json::json!({ "q": query, "num": k });
        let body = send_with_retries(
            || {
                self.client
                    .post(&self.endpoint)
                    .header("X-API-KEY", &self.api_key)
                    .json(&payload)
            },
            self.max_retries,
        )?;
        let mut hits = parse_serper(&body)?;
        hits.truncate(k);
        if self.fetch_pages {
            for h in &mut hits {
                h.content = self
                    .page_text(&h.link)
                    .filter(|t| !t.is_empty())
                    .unwrap_or_else(|| h.snippet.clone());
            }
        } else {
            for h in &mut hits {
                h.content = h.snippet.clone();
            }
        }
        Ok(hits)
    }

    fn name(&self) -> &str {
        "serper"
    }
}

/// Reduces an HTML document to whitespace-collapsed text.
pub fn strip_html(html: &str) -> String {
    static BLOCKS: OnceLock<Regex> = OnceLock::new();
    static TAGS: OnceLock<Regex> = OnceLock::new();
    let blocks = BLOCKS.get_or_init(|| {
        Regex::new(r"(?is)<(script|style|noscript)\b.*?</(script|style|noscript)\s*>|<!--.*?-->").unwrap()
    });
    let tags = TAGS.get_or_init(|| Regex::new(r"(?s)<[^>]*>").unwrap());
    let text = blocks.replace_all(html, " ");
    let text = tags.replace_all(&text, " ");
    let text = text
        .replace("&nbsp;", " ")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Serves searches from a [`Cache`], forwarding misses.
pub struct CachedRetriever<R> {
    inner: R,
    cache: Cache,
    kind: String,
}

impl<R: Retriever> CachedRetriever<R> {
    pub fn new(inner: R, cache: Cache) -> Self {
        let kind = format!("search-{}", inner.name());
        Self { inner, cache, kind }
    }
}

impl<R: Retriever> Retriever for CachedRetriever<R> {
    fn source(&self) -> ContextSource {
        self.inner.source()
    }

    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        let request = serde_json::json!({ "query": query, "k": k });
        self.cache
            .get_or_insert(&self.kind, &request, || self.inner.search(query, k))
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
