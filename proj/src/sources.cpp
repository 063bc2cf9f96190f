#include "protrl/sources.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "protrl/http.hpp"
#include "protrl/serialization.hpp"
#include "protrl/text.hpp"

namespace protrl {

namespace {

SearchResult make_result(SearchTool tool, std::string doc_id, std::string title, std::string snippet,
                         std::optional<std::string> url) {
  SearchResult r;
  r.source = tool;
  r.doc_id = std::move(doc_id);
  r.title = std::move(title);
  r.snippet = text::truncate_utf8(snippet, kMaxSnippetLength);
  r.url = std::move(url);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cassettes

json cassette_to_json(const Cassette& c) {
  json results = json::array();
  for (const auto& r : c.results) {
    json item = {{"doc_id", r.doc_id}, {"title", r.title}, {"snippet", r.snippet}};
    if (r.url) item["url"] = *r.url;
    results.push_back(std::move(item));
  }
  return json{{"tool", to_string(c.tool)}, {"keyword", c.keyword}, {"results", results}};
}

Cassette cassette_from_json(const json& j) {
  Cassette c;
  try {
    c.tool = parse_tool(j.at("tool").get<std::string>());
    c.keyword = normalize_keyword(j.at("keyword").get<std::string>());
    for (const auto& item : j.at("results")) {
      std::optional<std::string> url;
      if (item.contains("url") && item["url"].is_string()) url = item["url"].get<std::string>();
      c.results.push_back(make_result(c.tool, item.at("doc_id").get<std::string>(), item.value("title", ""),
                                      item.value("snippet", ""), std::move(url)));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("cassette: ") + e.what());
  }
  return c;
}

std::string cassette_file_name(SearchTool tool, std::string_view normalized_keyword) {
  std::string slug;
  for (unsigned char ch : normalized_keyword) {
    if (slug.size() >= 40) break;
    slug.push_back(std::isalnum(ch) ? static_cast<char>(ch) : '_');
  }
  return text::to_lower(to_string(tool)) + "__" + slug + "__" +
         text::digest_hex(normalized_keyword).substr(0, 8) + ".json";
}

CassetteStore::CassetteStore(const std::filesystem::path& dir) : dir_(dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::ConfigError, "cassette directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    json j = json::parse(read_file(f), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, "cassette " + f.string() + " is not JSON");
    auto c = cassette_from_json(j);
    auto key = std::make_pair(c.tool, c.keyword);
    cassettes_.insert_or_assign(std::move(key), std::move(c));
  }
}

const Cassette* CassetteStore::find(SearchTool tool, std::string_view keyword) const {
  auto it = cassettes_.find({tool, normalize_keyword(keyword)});
  return it == cassettes_.end() ? nullptr : &it->second;
}

std::vector<SearchResult> ReplaySource::search(std::string_view keyword, std::size_t limit) {
  const auto* c = store_->find(tool_, keyword);
  if (!c)
    throw Error(ErrorCode::CassetteMiss, "no " + std::string(to_string(tool_)) + " cassette for \"" +
                                             normalize_keyword(keyword) + "\"");
  std::vector<SearchResult> out(c->results.begin(),
                                c->results.begin() + static_cast<std::ptrdiff_t>(std::min(limit, c->results.size())));
  return out;
}

SourceSet make_replay_sources(const std::filesystem::path& cassette_dir) {
  auto store = std::make_shared<const CassetteStore>(cassette_dir);
  SourceSet set;
  for (auto tool : kAllTools) set[tool] = std::make_shared<ReplaySource>(tool, store);
  return set;
}

std::vector<SearchResult> RecordingSource::search(std::string_view keyword, std::size_t limit) {
  auto results = inner_->search(keyword, limit);
  Cassette c{inner_->tool(), normalize_keyword(keyword), results};
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(dir_);
  write_file(dir_ / cassette_file_name(c.tool, c.keyword), cassette_to_json(c).dump(2) + "\n");
  return results;
}

// ---------------------------------------------------------------------------
// Rate limiting

TokenBucket::TokenBucket(double rate_per_s, double burst)
    : rate_(rate_per_s), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------
// Live clients

namespace {

double rps_for(SearchTool tool, const LiveEndpoints& e) {
  switch (tool) {
    case SearchTool::UniProt: return e.uniprot_rps;
    case SearchTool::Literature: return e.literature_rps;
    case SearchTool::Web: return e.web_rps;
  }
  return 1;
}

std::string xml_unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    static constexpr std::pair<std::string_view, char> kEntities[] = {
        {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
    bool matched = false;
    for (auto [ent, ch] : kEntities) {
      if (s.compare(i, ent.size(), ent) == 0) {
        out.push_back(ch);
        i += ent.size() - 1;
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back('&');
  }
  return out;
}

// Text content of an element with inline markup (<i>, <sup>...) removed.
std::string strip_tags(std::string_view s) {
  std::string out;
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') in_tag = true;
    else if (c == '>') in_tag = false;
    else if (!in_tag) out.push_back(c);
  }
  return xml_unescape(out);
}

// Bodies of every <name ...>...</name> element inside `s`, in order.
std::vector<std::string_view> elements(std::string_view s, std::string_view name) {
  std::vector<std::string_view> out;
  const std::string open = "<" + std::string(name);
  const std::string close = "</" + std::string(name) + ">";
  std::size_t pos = 0;
  while ((pos = s.find(open, pos)) != std::string_view::npos) {
    const auto after = pos + open.size();
    if (after >= s.size() || (s[after] != '>' && s[after] != ' ')) {
      pos = after;
      continue;
    }
    auto body_begin = s.find('>', after);
    auto end = s.find(close, body_begin);
    if (body_begin == std::string_view::npos || end == std::string_view::npos) break;
    out.push_back(s.substr(body_begin + 1, end - body_begin - 1));
    pos = end + close.size();
  }
  return out;
}

}  // namespace

LiveSource::LiveSource(SearchTool tool, LiveEndpoints endpoints)
    : tool_(tool), endpoints_(std::move(endpoints)), bucket_(rps_for(tool, endpoints_), 1) {}

std::string LiveSource::fetch(const std::string& url) {
  http::Headers headers;
  if (tool_ == SearchTool::Web && !endpoints_.web_api_key.empty())
    headers.emplace_back("Authorization", "Bearer " + endpoints_.web_api_key);
  http::Response res;
  for (int attempt = 0;; ++attempt) {
    bucket_.acquire();
    res = http::get(url, headers, endpoints_.timeout_s);
    if (res.ok()) return res.body;
    const bool transient = res.status == 0 || res.status == 429 || res.status >= 500;
    if (!transient || attempt >= endpoints_.retries) break;
    std::this_thread::sleep_for(std::chrono::duration<double>(endpoints_.backoff_s * (1 << attempt)));
  }
  const auto what = std::string(to_string(tool_));
  if (res.status == 429) throw Error(ErrorCode::RateLimited, what + " kept answering 429");
  throw Error(ErrorCode::SourceUnavailable,
              what + ": " + (res.status == 0 ? res.error : "HTTP " + std::to_string(res.status)));
}

std::vector<SearchResult> LiveSource::search(std::string_view keyword, std::size_t limit) {
  const auto q = http::url_encode(text::trim(keyword));
  const auto n = std::to_string(limit);
  std::vector<SearchResult> out;
  auto parse_json = [&](const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorCode::SourceUnavailable, std::string(to_string(tool_)) + " returned non-JSON");
    return j;
  };
  switch (tool_) {
    case SearchTool::UniProt:
      out = parse_uniprot_search(parse_json(fetch(endpoints_.uniprot_base + "/uniprotkb/search?query=" + q +
                                                  "&format=json&size=" + n +
                                                  "&fields=accession,protein_name,organism_name,cc_function")));
      break;
    case SearchTool::Literature: {
      auto ids = parse_esearch_ids(parse_json(
          fetch(endpoints_.literature_base + "/esearch.fcgi?db=pubmed&retmode=json&retmax=" + n + "&term=" + q)));
      if (ids.empty()) break;
      std::string id_list;
      for (const auto& id : ids) id_list += (id_list.empty() ? "" : ",") + id;
      auto articles = parse_pubmed_xml(
          fetch(endpoints_.literature_base + "/efetch.fcgi?db=pubmed&retmode=xml&id=" + id_list));
      // keep esearch relevance order
      for (const auto& id : ids) {
        auto it = std::find_if(articles.begin(), articles.end(), [&](auto& a) { return a.doc_id == id; });
        if (it != articles.end()) out.push_back(*it);
      }
      break;
    }
    case SearchTool::Web:
      if (endpoints_.web_base.empty())
        throw Error(ErrorCode::SourceUnavailable, "Web: no web-search endpoint configured");
      out = parse_web_results(parse_json(fetch(endpoints_.web_base + "?q=" + q + "&count=" + n)));
      break;
  }
  if (out.size() > limit) out.resize(limit);
  return out;
}

SourceSet make_live_sources(const LiveEndpoints& endpoints) {
  SourceSet set;
  for (auto tool : kAllTools) set[tool] = std::make_shared<LiveSource>(tool, endpoints);
  return set;
}

std::vector<SearchResult> parse_uniprot_search(const json& j) {
  std::vector<SearchResult> out;
  if (!j.contains("results") || !j["results"].is_array()) return out;
  for (const auto& e : j["results"]) {
    const auto acc = e.value("primaryAccession", "");
    if (acc.empty()) continue;
    std::string name;
    if (auto pd = e.find("proteinDescription"); pd != e.end()) {
      if (pd->contains("recommendedName"))
        name = (*pd)["recommendedName"]["fullName"].value("value", "");
      else if (pd->contains("submissionNames") && !(*pd)["submissionNames"].empty())
        name = (*pd)["submissionNames"][0]["fullName"].value("value", "");
    }
    if (name.empty()) name = acc;
    if (auto org = e.find("organism"); org != e.end() && org->contains("scientificName"))
      name += " (" + (*org)["scientificName"].get<std::string>() + ")";
    std::string function;
    for (const auto& c : e.value("comments", json::array())) {
      if (c.value("commentType", "") != "FUNCTION") continue;
      for (const auto& t : c.value("texts", json::array()))
        function += (function.empty() ? "" : " ") + t.value("value", "");
    }
    out.push_back(make_result(SearchTool::UniProt, acc, name, function,
                              "https://www.uniprot.org/uniprotkb/" + acc + "/entry"));
  }
  return out;
}

std::vector<std::string> parse_esearch_ids(const json& j) {
  std::vector<std::string> ids;
  if (auto r = j.find("esearchresult"); r != j.end() && r->contains("idlist"))
    for (const auto& id : (*r)["idlist"]) ids.push_back(id.get<std::string>());
  return ids;
}

std::vector<SearchResult> parse_pubmed_xml(std::string_view xml) {
  std::vector<SearchResult> out;
  for (auto article : elements(xml, "PubmedArticle")) {
    auto pmids = elements(article, "PMID");
    if (pmids.empty()) continue;
    const auto pmid = text::trim(strip_tags(pmids.front()));
    auto titles = elements(article, "ArticleTitle");
    std::string abstract;
    for (auto part : elements(article, "AbstractText"))
      abstract += (abstract.empty() ? "" : " ") + text::trim(strip_tags(part));
    out.push_back(make_result(SearchTool::Literature, pmid,
                              titles.empty() ? std::string() : text::trim(strip_tags(titles.front())), abstract,
                              "https://pubmed.ncbi.nlm.nih.gov/" + pmid + "/"));
  }
  return out;
}

std::vector<SearchResult> parse_web_results(const json& j) {
  const json* arr = nullptr;
  if (j.contains("results") && j["results"].is_array()) arr = &j["results"];
  else if (j.contains("web") && j["web"].contains("results")) arr = &j["web"]["results"];
  std::vector<SearchResult> out;
  if (!arr) return out;
  for (const auto& r : *arr) {
    const auto url = r.value("url", "");
    if (url.empty()) continue;
    auto snippet = r.contains("snippet") ? r.value("snippet", "") : r.value("description", "");
    out.push_back(make_result(SearchTool::Web, url, r.value("title", ""), std::move(snippet), url));
  }
  return out;
}

}  // namespace protrl
