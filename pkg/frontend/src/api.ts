// Typed client for the observatory API. Payload shapes mirror the
// server's JSON exactly (snake_case field names included).

export interface TemporalWindow {
  start: string;
  end: string;
}

export interface LatestSummary {
  taken_at: string;
  total: number;
  distinct: number;
  store_fp: string;
  http_status: number;
  cors_allowed: boolean;
  tls_ok: boolean;
}

export interface LogFlags {
  has_duplicates: boolean;
  duplicate_count: number;
  flapping: boolean;
  missing_mmd_root: boolean;
  sentinel_hits: Record<string, boolean>;
}

export interface LogEntry {
  name: string;
  operator: string | null;
  url: string | null;
  google_state: string | null;
  apple_state: string | null;
  temporal_window: TemporalWindow | null;
  latest: LatestSummary | null;
  flags: LogFlags | null;
}

export interface LogsDoc {
  as_of: string | null;
  logs: LogEntry[];
}

export interface CoverageCell {
  log: string;
  vendor: string;
  covered: number;
  vendor_size: number;
  pct: number;
}

export interface CoverageDoc {
  as_of: string | null;
  vendors: string[];
  cells: CoverageCell[];
}

export interface SetResult {
  expr: string;
  as_of: string | null;
  size: number;
  fingerprints: string[];
}

export interface FrequencyDoc {
  as_of: string | null;
  universe: string;
  store_count: number;
  buckets: Record<string, number>;
  members: Record<string, string[]>;
}

export interface TimelinePoint {
  t: string;
  distinct: number;
}

export interface TimelineDoc {
  log: string;
  as_of: string;
  points: TimelinePoint[];
}

export interface ChangeEventRow {
  from: string;
  to: string;
  added: string[];
  removed: string[];
}

export interface EventsDoc {
  log: string;
  as_of: string;
  events: ChangeEventRow[];
}

export interface CertRow {
  fingerprint: string;
  subject: string | null;
  issuer: string | null;
  not_before: string | null;
  not_after: string | null;
  self_signed: boolean | null;
  included_in: number;
  parse_ok: boolean;
}

export interface CertsDoc {
  as_of: string | null;
  count: number;
  certs: CertRow[];
}

export interface CertQuery {
  include?: string[];
  subject?: string;
  expired?: boolean;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

function certParams(q: CertQuery): string {
  const params = new URLSearchParams();
  if (q.include !== undefined) params.set("include", q.include.join(","));
  if (q.subject) params.set("filter_subject", q.subject);
  if (q.expired !== undefined) params.set("expired", String(q.expired));
  const s = params.toString();
  return s ? `?${s}` : "";
}

export class ApiClient {
  private inflight = new Map<string, Promise<unknown>>();

  constructor(readonly base: string = "") {}

  // Concurrent identical requests share one in-flight promise; the key
  // is method + path + body, dropped once the request settles.
  private request<T>(method: string, path: string, body?: unknown, accept?: string): Promise<T> {
    const key = `${accept ?? "json"} ${method} ${path} ${body === undefined ? "" : JSON.stringify(body)}`;
    const hit = this.inflight.get(key);
    if (hit) return hit as Promise<T>;
    const job = this.send<T>(method, path, body, accept).finally(() => {
      this.inflight.delete(key);
    });
    this.inflight.set(key, job);
    return job;
  }

  private async send<T>(method: string, path: string, body?: unknown, accept?: string): Promise<T> {
    const init: RequestInit = { method };
    const headers: Record<string, string> = {};
    if (accept) headers["Accept"] = accept;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    if (Object.keys(headers).length) init.headers = headers;
    const res = await fetch(this.base + path, init);
    if (!res.ok) {
      let code = "http_error";
      let message = `HTTP ${res.status}`;
      try {
        const doc = await res.json();
        if (typeof doc.code === "string") code = doc.code;
        if (typeof doc.message === "string") message = doc.message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(res.status, code, message);
    }
    if (accept === "text/csv") return (await res.text()) as T;
    return (await res.json()) as T;
  }

  logs(): Promise<LogsDoc> {
    return this.request("GET", "/api/logs");
  }

  coverage(): Promise<CoverageDoc> {
    return this.request("GET", "/api/coverage");
  }

  set(expr: string): Promise<SetResult> {
    return this.request("POST", "/api/set", { expr });
  }

  frequency(program?: string, states?: string): Promise<FrequencyDoc> {
    const params = new URLSearchParams();
    if (program) params.set("program", program);
    if (program && states) params.set("states", states);
    const s = params.toString();
    return this.request("GET", `/api/frequency${s ? `?${s}` : ""}`);
  }

  timeline(log: string): Promise<TimelineDoc> {
    return this.request("GET", `/api/timeline/${encodeURIComponent(log)}`);
  }

  events(log: string): Promise<EventsDoc> {
    return this.request("GET", `/api/events/${encodeURIComponent(log)}`);
  }

  certs(q: CertQuery): Promise<CertsDoc> {
    return this.request("GET", `/api/certs${certParams(q)}`);
  }

  certsCsv(q: CertQuery): Promise<string> {
    return this.request("GET", `/api/certs${certParams(q)}`, undefined, "text/csv");
  }

  startFetch(): Promise<{ status: string }> {
    return this.request("POST", "/api/fetch", {});
  }
}
