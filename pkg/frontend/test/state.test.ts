import { describe, expect, it, vi } from 'vitest';

import { ServiceClient } from '../src/api';
import { MemoryStorage, SessionStore, askFlow } from '../src/state';
import { askResponse, jsonResponse, traceResponse } from './fixtures';

describe('session management', () => {
  it('creates and switches sessions with independent histories', () => {
    const store = new SessionStore();
    store.create('alpha');
    store.addTurn('alpha', 'q1', askResponse());
    store.create('beta');
    expect(store.activeSession()).toBe('beta');
    expect(store.activeTurns()).toHaveLength(0);
    store.switch('alpha');
    expect(store.activeTurns()).toHaveLength(1);
    expect(store.list()).toEqual(['alpha', 'beta', 'default']);
  });

  it('rejects switching to unknown sessions', () => {
    expect(() => new SessionStore().switch('ghost')).toThrow();
  });

  it('persists known sessions across reconstruction (page reload)', () => {
    const storage = new MemoryStorage();
    const first = new SessionStore(storage);
    first.create('kept');
    const second = new SessionStore(storage);
    expect(second.list()).toContain('kept');
    expect(second.activeSession()).toBe('kept');
  });
});

describe('recovery through the trace API', () => {
  it('rebuilds turns from archived traces', () => {
    const store = new SessionStore();
    const trace = traceResponse();
    const recovered = store.recoverFromTrace(trace);
    expect(recovered).toBe(2);
    store.create(trace.session_id);
    const turns = store.activeTurns();
    expect(turns[0].question).toBe(trace.traces[0].question);
    expect(turns[0].response.answer).toBe('the reflux drum');
    expect(turns[0].response.request_id).toBe('default-0001');
    expect(turns[1].response.verdict).toBe('ACCEPT');
    expect(turns[1].response.chosen_iteration).toBe(1);
  });

  it('recoverAll pulls every stored session and tolerates missing ones', async () => {
    const storage = new MemoryStorage();
    const before = new SessionStore(storage);
    before.create('default');
    before.create('empty-session');

    const fetchFn = vi.fn(async (url: string) => {
      if (url.endsWith('/v1/sessions/default/trace')) return jsonResponse(traceResponse());
      return jsonResponse({ error: { code: 'unknown_session', message: 'none' } }, 404);
    });
    const client = new ServiceClient('', fetchFn);

    const reloaded = new SessionStore(storage);
    const recovered = await reloaded.recoverAll(client);
    expect(recovered).toBe(2);
    reloaded.switch('default');
    expect(reloaded.activeTurns()).toHaveLength(2);
    reloaded.switch('empty-session');
    expect(reloaded.activeTurns()).toHaveLength(0);
  });
});

describe('ask flow', () => {
  it('appends the turn on success', async () => {
    const store = new SessionStore();
    const client = new ServiceClient(
      '',
      vi.fn(async () => jsonResponse(askResponse())),
    );
    const result = await askFlow(store, client, 'Which vessel?');
    expect(result.ok).toBe(true);
    expect(store.activeTurns()).toHaveLength(1);
  });

  it('keeps the store untouched on service failure so the input can be retried', async () => {
    const store = new SessionStore();
    const client = new ServiceClient(
      '',
      vi.fn(async () => jsonResponse({ error: { code: 'boom', message: 'down' } }, 500)),
    );
    const result = await askFlow(store, client, 'Which vessel?');
    expect(result.ok).toBe(false);
    expect(result.error).toContain('500');
    expect(store.activeTurns()).toHaveLength(0);
  });

  it('allows a single in-flight ask per session', async () => {
    const store = new SessionStore();
    let release!: (value: Response) => void;
    const gate = new Promise<Response>((resolve) => (release = resolve));
    const client = new ServiceClient(
      '',
      vi.fn(() => gate),
    );
    const first = askFlow(store, client, 'q1');
    const second = await askFlow(store, client, 'q2');
    expect(second.ok).toBe(false);
    expect(second.error).toContain('in flight');
    release(jsonResponse(askResponse()));
    expect((await first).ok).toBe(true);
  });
});
