/** Scene view model. Mirrors the latest service payloads verbatim: the UI
 * never computes a relation or answer itself, it only displays what the
 * service pushed (every edge in the model carries payload provenance). */

import type {
  Alert,
  AnswerMessage,
  Attention,
  Entity,
  PushMessage,
  Region,
  RelationEdge,
  StateMessage,
} from "./types.js";

export interface TranscriptEntry {
  t: number;
  speaker: string | null;
  question: string | null;
  answer: string;
  groundedObject: string | null;
}

export interface AlertEvent {
  t: number;
  event: "raised" | "cleared";
  kind: string;
  label: string;
  region: string;
}

export interface ProvenancedEdge extends RelationEdge {
  /** Sequence number of the state payload this edge arrived in. */
  fromStateSeq: number;
}

export type Listener = () => void;

export class SceneStore {
  entities: Entity[] = [];
  relations: ProvenancedEdge[] = [];
  regions: Region[] = [];
  alerts: Alert[] = [];
  attention: Attention = { mode: "idle" };
  serverTime = 0;
  frame = 0;
  connected = false;
  transcript: TranscriptEntry[] = [];
  alertLog: AlertEvent[] = [];
  selectedSpeaker: string | null = null;
  highlighted: RelationEdge[] = [];

  private stateSeq = 0;
  private listeners: Listener[] = [];

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
    this.notify();
  }

  /** The one and only way scene content enters the model. */
  applyState(msg: StateMessage): void {
    this.stateSeq += 1;
    this.entities = msg.entities;
    this.relations = msg.relations.map((r) => ({ ...r, fromStateSeq: this.stateSeq }));
    this.regions = msg.regions;
    this.alerts = msg.alerts;
    this.attention = msg.attention;
    this.serverTime = msg.time;
    this.frame = msg.frame;
    if (this.selectedSpeaker === null) {
      const person = msg.entities.find((e) => e.kind === "person" && e.state !== "lost");
      if (person) this.selectedSpeaker = person.source_id ?? person.id;
    }
    this.notify();
  }

  /** Transcript entries keep server arrival order, never re-sorted. */
  appendAnswer(msg: AnswerMessage): void {
    this.transcript.push({
      t: msg.t,
      speaker: msg.speaker,
      question: msg.text,
      answer: msg.answer.text,
      groundedObject: msg.answer.grounded_object,
    });
    this.notify();
  }

  appendAlertEvent(ev: AlertEvent): void {
    this.alertLog.push(ev);
    this.notify();
  }

  /** Canvas highlight for the relations a rendered answer cited. */
  highlight(edges: RelationEdge[]): void {
    this.highlighted = edges;
    this.notify();
  }

  dispatch(msg: PushMessage): void {
    if (msg.type === "state" || (msg as StateMessage).entities !== undefined) {
      this.applyState(msg as StateMessage);
    } else if (msg.type === "answer") {
      this.appendAnswer(msg as AnswerMessage);
    } else if (msg.type === "alert") {
      const m = msg as AlertEvent & { type: "alert" };
      this.appendAlertEvent({ t: m.t, event: m.event, kind: m.kind, label: m.label, region: m.region });
    }
    // unknown message types are ignored for forward compatibility
  }

  /** Seconds left in the attention window, by the latest server clock. */
  countdownRemaining(): number | null {
    if (this.attention.mode === "idle" || this.attention.deadline == null) return null;
    return Math.max(0, this.attention.deadline - this.serverTime);
  }

  entity(id: string): Entity | undefined {
    return this.entities.find((e) => e.id === id);
  }

  /** Every displayed edge must point at its originating state payload. */
  edgesHaveProvenance(): boolean {
    return this.relations.every((r) => r.fromStateSeq > 0 && r.fromStateSeq <= this.stateSeq);
  }
}
