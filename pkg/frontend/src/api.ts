/**
 * Service API client.
 *
 * A thin, instrumented wrapper over the service's HTTP endpoints. Every
 * request - including failures - is appended to `log`, so tests and the
 * workbench's network panel can prove when an interaction was served
 * purely from client-side state (no new log entry).
 */

export interface BreakdownEntry {
  category: string;
  weight: number;
  matched: boolean;
  matched_by: string | null;
  timestamp: string | null;
}

export interface RankedEntry {
  subject: string[];
  seed: string;
  score: number;
  gate_failure: string | null;
  breakdown: BreakdownEntry[];
}

export interface QueryJob {
  id: string;
  status: string;
  graph_version: number;
  name: string;
  mode: string;
  threshold: number;
  results: RankedEntry[];
}

export interface LabelScore {
  category: string;
  probability: number;
}

export interface NamedSpan {
  name: string;
  span: number[];
}

export interface DateSpan {
  date: string;
  span: number[];
}

export interface SentenceEntities {
  dates: DateSpan[];
  persons: NamedSpan[];
  organizations: NamedSpan[];
}

export interface ClassifiedSentence {
  text: string;
  labels: LabelScore[];
  entities: SentenceEntities;
}

export interface ClassifyResponse {
  sentences: ClassifiedSentence[];
}

export interface FeedbackRecord {
  text: string;
  predicted: string[];
  corrected: string[];
  note?: string;
}

export interface FeedbackResponse {
  appended_corpus_size: number;
}

export interface IngestReport {
  nodes_added: number;
  edges_added: number;
  errors: { line: number; message: string }[];
}

export interface FetchLogEntry {
  method: string;
  path: string;
  status: number; // 0 when the request never produced a response
}

/** Non-2xx response; `detail` is the parsed response body's detail field. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: unknown) {
    super(typeof detail === 'string' ? detail : JSON.stringify(detail));
  }
}

interface RequestOptions {
  body?: string;
  contentType?: string;
  signal?: AbortSignal;
}

export class ApiClient {
  readonly log: FetchLogEntry[] = [];

  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, options: RequestOptions = {}): Promise<T> {
    const headers: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    if (options.contentType !== undefined) headers['Content-Type'] = options.contentType;
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers,
        body: options.body,
        signal: options.signal,
      });
    } catch (err) {
      this.log.push({ method, path, status: 0 });
      throw err;
    }
    this.log.push({ method, path, status: response.status });
    const text = await response.text();
    const parsed: unknown = text === '' ? null : safeJson(text);
    if (!response.ok) {
      const detail = isRecord(parsed) && 'detail' in parsed ? parsed.detail : parsed;
      throw new ApiError(response.status, detail);
    }
    return parsed as T;
  }

  postQuery(dsl: string, signal?: AbortSignal): Promise<QueryJob> {
    return this.request('POST', '/queries', { body: dsl, contentType: 'text/plain', signal });
  }

  /** Without a threshold the service re-filters at the query's stored one. */
  getQuery(id: string, threshold?: number, signal?: AbortSignal): Promise<QueryJob> {
    const base = `/queries/${encodeURIComponent(id)}`;
    const path = threshold === undefined
      ? base
      : `${base}?threshold=${encodeURIComponent(String(threshold))}`;
    return this.request('GET', path, { signal });
  }

  classify(text: string): Promise<ClassifyResponse> {
    return this.request('POST', '/documents/classify', {
      body: JSON.stringify({ text }),
      contentType: 'application/json',
    });
  }

  sendFeedback(record: FeedbackRecord): Promise<FeedbackResponse> {
    return this.request('POST', '/feedback', {
      body: JSON.stringify(record),
      contentType: 'application/json',
    });
  }

  ingest(lines: string): Promise<IngestReport> {
    return this.request('POST', '/graph/ingest', {
      body: lines,
      contentType: 'application/x-ndjson',
    });
  }
}

function safeJson(text: string): unknown {
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === 'object' && value !== null;
}
