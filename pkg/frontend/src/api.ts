// Thin typed client over the review-service HTTP endpoints.

import type {
  AgreementStats,
  AnnotationCard,
  ClassifyResult,
  LabelMatrix,
  QueueResponse,
  SessionCreated,
  SessionKind,
  TriageCard,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: Record<string, unknown>,
  ) {
    super(`HTTP ${status}: ${String(body['error'] ?? 'request failed')}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ConsoleApi {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = fetch,
    private readonly token = '',
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    const response = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      throw new ApiError(response.status, doc);
    }
    return doc as T;
  }

  createSession(
    kind: SessionKind,
    quotas?: Record<string, number>,
    seed?: number,
  ): Promise<SessionCreated> {
    return this.request('POST', '/session', { kind, quotas, seed });
  }

  triageQueue(session: string): Promise<QueueResponse<TriageCard>> {
    return this.request('GET', `/queue/${session}`);
  }

  annotationQueue(session: string, annotator: string): Promise<QueueResponse<AnnotationCard>> {
    return this.request('GET', `/queue/${session}?annotator=${encodeURIComponent(annotator)}`);
  }

  classify(card: {
    task_id: string;
    model_name: string;
    column: string;
    category: string;
    reviewer: string;
  }): Promise<ClassifyResult> {
    return this.request('POST', '/classify', card);
  }

  label(session: string, item: string, label: string, annotator: string): Promise<void> {
    return this.request('POST', '/label', { session, item, label, annotator });
  }

  agreement(session: string): Promise<AgreementStats> {
    return this.request('GET', `/agreement/${session}`);
  }

  exportLabels(session: string): Promise<LabelMatrix> {
    return this.request('GET', `/labels/${session}`);
  }
}
