// Thin client for the QA service HTTP API. The fetch implementation is
// injectable so tests can run without a network.

import type { AskResponse, HealthView, TraceResponse } from './types';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number | null = null,
  ) {
    super(message);
    this.name = 'ServiceError';
  }
}

export interface AskOptions {
  task?: string;
  goldAnswer?: string;
  mcOptions?: string[];
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON error bodies fall through to the status check
    }
    if (!response.ok) {
      const detail =
        body && typeof body === 'object' && 'error' in body
          ? JSON.stringify((body as { error: unknown }).error)
          : response.statusText;
      throw new ServiceError(`service error ${response.status}: ${detail}`, response.status);
    }
    return body as T;
  }

  health(): Promise<HealthView> {
    return this.request<HealthView>('/healthz');
  }

  ask(sessionId: string, question: string, options: AskOptions = {}): Promise<AskResponse> {
    const payload: Record<string, unknown> = { session_id: sessionId, question };
    if (options.task) payload.task = options.task;
    if (options.goldAnswer) payload.gold_answer = options.goldAnswer;
    if (options.mcOptions) payload.mc_options = options.mcOptions;
    return this.request<AskResponse>('/v1/ask', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  sessionTrace(sessionId: string): Promise<TraceResponse> {
    return this.request<TraceResponse>(`/v1/sessions/${encodeURIComponent(sessionId)}/trace`);
  }
}
