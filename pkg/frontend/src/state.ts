// Session state: ordered turns per session, recoverable from the service
// trace API so a page reload loses nothing the server still knows.

import type { ServiceClient } from './api';
import type { AskResponse, TraceResponse, TurnView } from './types';

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class MemoryStorage implements StorageLike {
  private data = new Map<string, string>();

  getItem(key: string): string | null {
    return this.data.has(key) ? (this.data.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
}

const SESSIONS_KEY = 'schemqa.sessions';
const ACTIVE_KEY = 'schemqa.active';

export class SessionStore {
  private turns = new Map<string, TurnView[]>();
  private active = 'default';

  constructor(private readonly storage: StorageLike = new MemoryStorage()) {
    const known = this.storage.getItem(SESSIONS_KEY);
    if (known) {
      for (const id of JSON.parse(known) as string[]) this.turns.set(id, []);
    }
    const active = this.storage.getItem(ACTIVE_KEY);
    if (active && this.turns.has(active)) this.active = active;
    if (!this.turns.has(this.active)) this.turns.set(this.active, []);
    this.persist();
  }

  private persist(): void {
    this.storage.setItem(SESSIONS_KEY, JSON.stringify(this.list()));
    this.storage.setItem(ACTIVE_KEY, this.active);
  }

  list(): string[] {
    return [...this.turns.keys()].sort();
  }

  activeSession(): string {
    return this.active;
  }

  activeTurns(): TurnView[] {
    return [...(this.turns.get(this.active) ?? [])];
  }

  create(id: string): void {
    if (!id.trim()) throw new Error('session id must be non-empty');
    if (!this.turns.has(id)) this.turns.set(id, []);
    this.active = id;
    this.persist();
  }

  switch(id: string): void {
    if (!this.turns.has(id)) throw new Error(`unknown session ${id}`);
    this.active = id;
    this.persist();
  }

  addTurn(sessionId: string, question: string, response: AskResponse): void {
    const turns = this.turns.get(sessionId) ?? [];
    turns.push({ question, response });
    this.turns.set(sessionId, turns);
    this.persist();
  }

  /** Rebuild one session's turns from the service trace archives. */
  recoverFromTrace(trace: TraceResponse): number {
    const turns: TurnView[] = trace.traces.map((archive) => ({
      question: archive.question,
      response: {
        ...archive.final,
        request_id: archive.request_id,
        session_id: archive.session_id,
      },
    }));
    this.turns.set(trace.session_id, turns);
    this.persist();
    return turns.length;
  }

  /** Recover every known session that the service still has traces for. */
  async recoverAll(client: ServiceClient): Promise<number> {
    let recovered = 0;
    for (const id of this.list()) {
      try {
        recovered += this.recoverFromTrace(await client.sessionTrace(id));
      } catch {
        // a session with no server-side traces simply stays empty
      }
    }
    return recovered;
  }
}

export interface AskFlowResult {
  ok: boolean;
  response?: AskResponse;
  error?: string;
}

const inFlight = new Set<string>();

/** One ask round-trip: post the question, append the turn on success.
 * Failures leave the store untouched so the caller can offer a retry
 * with the preserved input. Only one ask may be in flight per session. */
export async function askFlow(
  store: SessionStore,
  client: ServiceClient,
  question: string,
): Promise<AskFlowResult> {
  const session = store.activeSession();
  if (inFlight.has(session)) {
    return { ok: false, error: 'a question is already in flight for this session' };
  }
  inFlight.add(session);
  try {
    const response = await client.ask(session, question);
    store.addTurn(session, question, response);
    return { ok: true, response };
  } catch (err) {
    return { ok: false, error: err instanceof Error ? err.message : String(err) };
  } finally {
    inFlight.delete(session);
  }
}
