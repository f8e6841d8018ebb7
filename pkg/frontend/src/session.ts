// Demo-grade identity selection: the key secret issued at registration is
// held locally and used to sign requests. Hiding controls by role is
// cosmetic only; the server re-checks every call.

import type { ApiClient, Role, Session } from "./api.js";

export interface KeyStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "blocklot-keys";

export class SessionManager {
  current: Session | null = null;

  constructor(private storage: KeyStore) {}

  private readAll(): Record<string, Session> {
    try {
      return JSON.parse(this.storage.getItem(STORAGE_KEY) ?? "{}");
    } catch {
      return {};
    }
  }

  knownSessions(): Session[] {
    return Object.values(this.readAll());
  }

  remember(session: Session): void {
    const all = this.readAll();
    all[session.identityId] = session;
    this.storage.setItem(STORAGE_KEY, JSON.stringify(all));
  }

  select(identityId: string): Session | null {
    this.current = this.readAll()[identityId] ?? null;
    return this.current;
  }

  async register(api: ApiClient, displayName: string, role: Role): Promise<Session> {
    const issued = await api.register(displayName, role);
    await api.waitCommitted(issued.txId);
    const session: Session = {
      identityId: issued.identityId,
      displayName: issued.displayName,
      role: issued.role,
      keySecret: issued.keySecret,
    };
    this.remember(session);
    this.current = session;
    return session;
  }
}
