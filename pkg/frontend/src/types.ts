/** Wire types mirroring the service's JSON payloads. */

export interface Box {
  min: [number, number, number];
  max: [number, number, number];
}

export interface Hand {
  pos: [number, number, number];
  pointing?: [number, number, number] | null;
}

export interface Entity {
  id: string;
  kind: "person" | "object";
  label: string | null;
  state: "visible" | "held" | "lost";
  centroid: [number, number, number];
  bbox: Box;
  held_by?: string | null;
  owner?: string | null;
  source_id?: string | null;
  hands?: Hand[];
}

export interface RelationEdge {
  kind: string;
  subject: string;
  object: string;
  since: number;
}

export interface Region {
  name: string;
  box: Box;
}

export interface Alert {
  kind: "missing" | "misplaced";
  label: string;
  region: string;
  raised_at: number;
}

export interface Attention {
  mode: "idle" | "attending" | "engaged";
  deadline?: number | null;
}

export interface StateMessage {
  type?: "state";
  frame: number;
  time: number;
  entities: Entity[];
  relations: RelationEdge[];
  regions: Region[];
  alerts: Alert[];
  attention: Attention;
  transcript_len: number;
}

export interface AnswerMessage {
  type: "answer";
  t: number;
  speaker: string | null;
  text: string | null;
  answer: { text: string; grounded_object: string | null };
}

export interface AlertMessage {
  type: "alert";
  t: number;
  event: "raised" | "cleared";
  kind: string;
  label: string;
  region: string;
}

export type PushMessage = StateMessage | AnswerMessage | AlertMessage | { type: string };

export interface QueryResponse {
  answered: boolean;
  reason?: string | null;
  time: number;
  text?: string | null;
  grounded_object?: string | null;
  relations_used: RelationEdge[];
}
