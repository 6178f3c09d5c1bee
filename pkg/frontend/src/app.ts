// DOM bootstrap: wires the session store, service client and renderers to
// the static page. All markup comes from views.ts; all numbers come from
// the service.

import { ServiceClient } from './api';
import { SessionStore, askFlow } from './state';
import { errorBanner, sessionListView, turnView } from './views';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export async function boot(): Promise<void> {
  const client = new ServiceClient('');
  const store = new SessionStore(window.localStorage);

  const thread = el<HTMLDivElement>('thread');
  const sessionsBox = el<HTMLDivElement>('sessions');
  const input = el<HTMLInputElement>('question');
  const sendButton = el<HTMLButtonElement>('send');
  const newButton = el<HTMLButtonElement>('new-session');
  const status = el<HTMLDivElement>('status');
  const banner = el<HTMLDivElement>('banner');
  const scrollPositions = new Map<string, number>();

  function renderSessions(): void {
    sessionsBox.innerHTML = sessionListView(store.list(), store.activeSession());
    for (const item of sessionsBox.querySelectorAll<HTMLLIElement>('li[data-session]')) {
      item.addEventListener('click', () => {
        scrollPositions.set(store.activeSession(), thread.scrollTop);
        store.switch(item.dataset.session as string);
        renderAll();
        thread.scrollTop = scrollPositions.get(store.activeSession()) ?? 0;
      });
    }
  }

  function renderThread(): void {
    thread.innerHTML = store.activeTurns().map(turnView).join('');
  }

  function renderAll(): void {
    renderSessions();
    renderThread();
  }

  async function submit(): Promise<void> {
    const question = input.value.trim();
    if (!question) return;
    banner.innerHTML = '';
    sendButton.disabled = true;
    const result = await askFlow(store, client, question);
    sendButton.disabled = false;
    if (result.ok) {
      input.value = ''; // a failure keeps the input for retry
      renderThread();
      thread.scrollTop = thread.scrollHeight;
    } else {
      banner.innerHTML = errorBanner(result.error ?? 'ask failed');
      banner.querySelector('.retry')?.addEventListener('click', () => void submit());
    }
  }

  sendButton.addEventListener('click', () => void submit());
  input.addEventListener('keydown', (event) => {
    if (event.key === 'Enter') void submit();
  });
  newButton.addEventListener('click', () => {
    const id = window.prompt('session id', `s-${Date.now().toString(36)}`);
    if (id) {
      store.create(id);
      renderAll();
    }
  });

  try {
    const health = await client.health();
    status.textContent = `connected — ${health.documents} documents, ${health.chunks} chunks`;
    status.className = 'status ok';
  } catch {
    status.textContent = 'service unreachable';
    status.className = 'status down';
  }

  // page reload: pull every known session back from the trace API
  await store.recoverAll(client);
  renderAll();
}

if (typeof document !== 'undefined' && document.getElementById('thread')) {
  void boot();
}
